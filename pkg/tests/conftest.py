import math
from pathlib import Path

import numpy as np
import pytest

from asrnoise.corruption import tokenize
from asrnoise.resources import (FeatureTable, PronouncingLexicon, VectorLexicon, data_dir,
                                load_cmudict, load_feature_table, load_vectors)
from asrnoise.substitution import TableConfig, build_table

FIXTURES = Path(__file__).resolve().parents[1] / "src" / "asrnoise" / "data" / "fixtures"
VECTORS = FIXTURES / "toy_vectors.txt"
CMUDICT = FIXTURES / "cmudict_subset.dict"
CORPUS = FIXTURES / "corpus.txt"
STS_PAIRS = FIXTURES / "sts_pairs.tsv"
FEATURES = data_dir() / "hayes_features.csv"


@pytest.fixture(scope="session")
def lex():
    return load_vectors(VECTORS)


@pytest.fixture(scope="session")
def plex():
    return load_cmudict(CMUDICT)


@pytest.fixture(scope="session")
def ftab():
    return load_feature_table(FEATURES)


@pytest.fixture(scope="session")
def corpus_lines():
    return CORPUS.read_text(encoding="utf-8").splitlines()


@pytest.fixture(scope="session")
def corpus_vocab(corpus_lines):
    return {c for line in corpus_lines for c in tokenize(line).cores}


@pytest.fixture(scope="session")
def fixture_table(corpus_vocab, lex, plex, ftab):
    return build_table(corpus_vocab, lex, plex, ftab, TableConfig(), workers=1)


# A five-word world small enough to check by hand: three features, six
# phonemes, vectors chosen so every word neighbours every other.
TINY_FEATURES = ("voice", "labial", "syllabic")
TINY_ROWS = {
    "P": (-1, +1, -1),
    "B": (+1, +1, -1),
    "T": (-1, -1, -1),
    "D": (+1, -1, -1),
    "AE": (+1, 0, +1),
    "IH": (+1, -1, +1),
}
TINY_PRONS = {
    "pat": [("P", "AE", "T")],
    "bat": [("B", "AE", "T")],
    "bad": [("B", "AE", "D")],
    "pit": [("P", "IH", "T")],
    "tip": [("T", "IH", "P"), ("T", "AE", "P")],
}
TINY_VECTORS = {
    "pat": (1.0, 0.2, 0.1),
    "bat": (0.9, 0.3, 0.0),
    "bad": (0.7, 0.1, 0.5),
    "pit": (0.8, -0.2, 0.3),
    "tip": (0.2, 0.9, 0.4),
}


@pytest.fixture
def tiny():
    words = sorted(TINY_VECTORS)
    lex = VectorLexicon(words, np.array([TINY_VECTORS[w] for w in words]))
    plex = PronouncingLexicon({w: tuple(p) for w, p in TINY_PRONS.items()})
    ftab = FeatureTable(TINY_FEATURES, dict(TINY_ROWS))
    return lex, plex, ftab


def close(a, b, tol):
    return math.isclose(a, b, rel_tol=0.0, abs_tol=tol)


# Acceptance criteria report one line each at the end of the session.
_CRITERIA: dict[int, tuple[str, str]] = {}


def record_criterion(n: int, status: str, detail: str) -> None:
    _CRITERIA[n] = (status, detail)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_CRITERIA):
        status, detail = _CRITERIA[n]
        terminalreporter.write_line(f"criterion {n:2d}: {status}  {detail}")
