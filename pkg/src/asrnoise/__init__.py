"""Simulate ASR word-substitution errors and measure sentence-embedding robustness."""

__version__ = "0.1.0"
