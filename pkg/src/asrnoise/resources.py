"""Loaders for the lexical resources used by the simulator and the embedders.

Four kinds of files are read here:

* word vectors in GloVe / word2vec text format,
* a CMU-style pronouncing dictionary,
* a phoneme articulation-feature table (CSV),
* a stopword list.

Every loader lowercases tokens so the resources can be joined on a common key.
All returned tables are treated as immutable.
"""

from __future__ import annotations

import csv
import hashlib
import logging
import os
import re
from dataclasses import dataclass, field
from pathlib import Path
from types import MappingProxyType
from typing import Iterable, Mapping

import numpy as np

log = logging.getLogger(__name__)

DATA_ENV_VAR = "ASRNOISE_DATA"

_MINUS_SIGNS = {"-", "−", "–"}
_STRESS = re.compile(r"[0-2]$")
_ALTERNATE = re.compile(r"^(.+)\((\d+)\)$")


class ResourceError(ValueError):
    """A resource file could not be read or failed validation."""


def data_dir() -> Path:
    """Directory holding the shipped data files (overridable via ``ASRNOISE_DATA``)."""
    env = os.environ.get(DATA_ENV_VAR)
    if env:
        return Path(env)
    return Path(__file__).resolve().parent / "data"


def file_id(path: str | os.PathLike) -> str:
    """Content identity of a file: ``name:size:sha256-prefix``."""
    p = Path(path)
    h = hashlib.sha256()
    with open(p, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return f"{p.name}:{p.stat().st_size}:{h.hexdigest()[:16]}"


# ---------------------------------------------------------------------------
# Word vectors
# ---------------------------------------------------------------------------


class VectorLexicon:
    """Token -> dense vector table backed by a read-only matrix."""

    def __init__(self, tokens: list[str], matrix: np.ndarray, *, source: str = "",
                 n_malformed: int = 0, n_duplicates: int = 0, n_zero: int = 0):
        matrix = np.array(matrix, dtype=np.float64)
        if matrix.ndim != 2 or matrix.shape[0] != len(tokens):
            raise ResourceError("matrix shape does not match token count")
        if matrix.shape[1] < 1:
            raise ResourceError("vector dimension must be positive")
        norms = np.linalg.norm(matrix, axis=1)
        if np.any(norms == 0):
            raise ResourceError("zero vectors are not allowed in a VectorLexicon")
        if len(set(tokens)) != len(tokens):
            raise ResourceError("duplicate tokens in VectorLexicon")
        matrix.flags.writeable = False
        norms.flags.writeable = False
        self._tokens = tuple(tokens)
        self._index = MappingProxyType({t: i for i, t in enumerate(tokens)})
        self.matrix = matrix
        self.norms = norms
        self.source = source
        self.n_malformed = n_malformed
        self.n_duplicates = n_duplicates
        self.n_zero = n_zero

    @property
    def dim(self) -> int:
        return self.matrix.shape[1]

    @property
    def tokens(self) -> tuple[str, ...]:
        return self._tokens

    def __len__(self) -> int:
        return len(self._tokens)

    def __contains__(self, token: object) -> bool:
        return token in self._index

    def __getitem__(self, token: str) -> np.ndarray:
        return self.matrix[self._index[token]]

    def index(self, token: str) -> int:
        return self._index[token]

    def norm(self, token: str) -> float:
        return float(self.norms[self._index[token]])

    def get(self, token: str, default=None):
        i = self._index.get(token)
        return default if i is None else self.matrix[i]

    def unit_matrix(self) -> np.ndarray:
        return self.matrix / self.norms[:, None]

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, VectorLexicon):
            return NotImplemented
        return self._tokens == other._tokens and np.array_equal(self.matrix, other.matrix)

    def __repr__(self) -> str:
        return f"VectorLexicon(n={len(self)}, dim={self.dim}, source={self.source!r})"


def _is_header(fields: list[str]) -> bool:
    if len(fields) != 2:
        return False
    try:
        int(fields[0])
        int(fields[1])
    except ValueError:
        return False
    return True


def load_vectors(path: str | os.PathLike, expected_dim: int | None = None,
                 vocabulary: Iterable[str] | None = None) -> VectorLexicon:
    """Read a GloVe or word2vec-text vector file.

    A first line consisting of exactly two integers is taken as a
    ``count dim`` header.  Tokens are lowercased; the first occurrence of a
    token wins.  Lines with the wrong field count or unparsable numbers are
    counted as malformed and skipped, as are all-zero vectors.

    If ``vocabulary`` is given only those (lowercased) tokens are kept, which
    avoids parsing floats for the rest of a large file.
    """
    keep = None if vocabulary is None else {t.lower() for t in vocabulary}
    tokens: list[str] = []
    rows: list[np.ndarray] = []
    seen: set[str] = set()
    dim = None
    n_malformed = n_duplicates = n_zero = 0
    try:
        fh = open(path, encoding="utf-8", errors="replace")
    except OSError as exc:
        raise ResourceError(f"cannot read vector file {path}: {exc}") from exc
    with fh:
        for lineno, line in enumerate(fh):
            fields = line.split()
            if not fields:
                continue
            if lineno == 0 and _is_header(fields):
                dim = int(fields[1])
                continue
            if dim is None:
                dim = len(fields) - 1
                if dim < 1:
                    n_malformed += 1
                    dim = None
                    continue
            if len(fields) != dim + 1:
                n_malformed += 1
                continue
            token = fields[0].lower()
            if token in seen:
                n_duplicates += 1
                continue
            if keep is not None and token not in keep:
                continue
            try:
                vec = np.array(fields[1:], dtype=np.float64)
            except ValueError:
                n_malformed += 1
                continue
            if not np.all(np.isfinite(vec)):
                n_malformed += 1
                continue
            if not np.any(vec):
                n_zero += 1
                continue
            seen.add(token)
            tokens.append(token)
            rows.append(vec)
    if n_zero:
        log.warning("%s: skipped %d zero vectors", path, n_zero)
    if n_malformed:
        log.warning("%s: skipped %d malformed lines", path, n_malformed)
    if not tokens:
        raise ResourceError(f"no valid vectors in {path}")
    if expected_dim is not None and dim != expected_dim:
        raise ResourceError(f"{path}: dimension {dim} does not match expected {expected_dim}")
    return VectorLexicon(tokens, np.vstack(rows), source=str(path), n_malformed=n_malformed,
                         n_duplicates=n_duplicates, n_zero=n_zero)


# ---------------------------------------------------------------------------
# Pronouncing dictionary
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PronouncingLexicon:
    entries: Mapping[str, tuple[tuple[str, ...], ...]]
    source: str = ""

    def __contains__(self, token: object) -> bool:
        return token in self.entries

    def __getitem__(self, token: str) -> tuple[tuple[str, ...], ...]:
        return self.entries[token]

    def __len__(self) -> int:
        return len(self.entries)

    def phonemes(self) -> set[str]:
        return {ph for prons in self.entries.values() for pron in prons for ph in pron}


def strip_stress(phoneme: str) -> str:
    return _STRESS.sub("", phoneme)


def load_cmudict(path: str | os.PathLike) -> PronouncingLexicon:
    """Parse a CMU pronouncing dictionary.

    Handles both the classic uppercase file (``;;;`` comments, two-space
    separator) and the newer lowercase ``cmudict.dict`` with trailing ``#``
    comments.  ``WORD(2)`` style alternates are merged under ``word``.
    """
    entries: dict[str, list[tuple[str, ...]]] = {}
    try:
        fh = open(path, encoding="utf-8", errors="replace")
    except OSError as exc:
        raise ResourceError(f"cannot read pronouncing dictionary {path}: {exc}") from exc
    with fh:
        for line in fh:
            if line.startswith(";;;"):
                continue
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            fields = line.split()
            if len(fields) < 2:
                continue
            word = fields[0]
            m = _ALTERNATE.match(word)
            if m:
                word = m.group(1)
            pron = tuple(strip_stress(p.upper()) for p in fields[1:])
            prons = entries.setdefault(word.lower(), [])
            if pron not in prons:
                prons.append(pron)
    return PronouncingLexicon(
        MappingProxyType({w: tuple(p) for w, p in entries.items()}), source=str(path))


# ---------------------------------------------------------------------------
# Feature table
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FeatureTable:
    """Phoneme -> articulation-feature row over the alphabet ``{+1, -1, 0}``."""

    features: tuple[str, ...]
    rows: Mapping[str, tuple[int, ...]]
    source: str = ""

    def __contains__(self, phoneme: object) -> bool:
        return phoneme in self.rows

    def __getitem__(self, phoneme: str) -> tuple[int, ...]:
        return self.rows[phoneme]

    def __len__(self) -> int:
        return len(self.rows)

    @property
    def phonemes(self) -> tuple[str, ...]:
        return tuple(self.rows)


def _feature_value(cell: str) -> int | None:
    cell = cell.strip()
    if cell == "+":
        return 1
    if cell in _MINUS_SIGNS:
        return -1
    if cell == "0":
        return 0
    return None


def load_feature_table(path: str | os.PathLike, binary: bool = False) -> FeatureTable:
    """Read a phoneme feature CSV.

    The header holds the feature names, optionally preceded by a label for the
    phoneme column.  With ``binary=True`` unspecified (``0``) values are read
    as ``-``.
    """
    try:
        with open(path, encoding="utf-8", newline="") as fh:
            raw = [row for row in csv.reader(fh) if row and any(c.strip() for c in row)]
    except OSError as exc:
        raise ResourceError(f"cannot read feature table {path}: {exc}") from exc
    if not raw:
        raise ResourceError(f"{path}: empty feature table")
    header = [c.strip() for c in raw[0]]
    data = raw[1:]
    if not data:
        raise ResourceError(f"{path}: no phonemes")
    width = len(data[0])
    if len(header) == width:
        header = header[1:]
    elif len(header) != width - 1:
        raise ResourceError(f"{path}: header has {len(header)} fields but rows have {width}")
    rows: dict[str, tuple[int, ...]] = {}
    for r, row in enumerate(data, start=2):
        if len(row) != width:
            raise ResourceError(f"{path}: ragged row {r} ({len(row)} fields, expected {width})")
        symbol = row[0].strip().upper()
        if symbol in rows:
            raise ResourceError(f"{path}: duplicate phoneme {symbol!r} on row {r}")
        values = []
        for c, cell in enumerate(row[1:]):
            v = _feature_value(cell)
            if v is None:
                raise ResourceError(
                    f"{path}: invalid value {cell!r} at row {r}, column {header[c]!r}")
            if binary and v == 0:
                v = -1
            values.append(v)
        rows[symbol] = tuple(values)
    return FeatureTable(tuple(header), MappingProxyType(rows), source=str(path))


# ---------------------------------------------------------------------------
# Stopwords
# ---------------------------------------------------------------------------


def load_stopwords(path: str | os.PathLike | None = None) -> frozenset[str]:
    """One token per line, ``#`` starts a comment.  Defaults to the shipped list."""
    if path is None:
        path = data_dir() / "stopwords.txt"
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ResourceError(f"cannot read stopword list {path}: {exc}") from exc
    words = set()
    for line in text.splitlines():
        line = line.split("#", 1)[0].strip().lower()
        if line:
            words.add(line)
    if not words:
        raise ResourceError(f"{path}: stopword list is empty")
    return frozenset(words)


# ---------------------------------------------------------------------------
# Cross-validation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ValidationReport:
    eligible: frozenset[str]
    missing_phonemes: tuple[str, ...]
    n_vectors: int
    n_pronunciations: int
    vector_coverage: float = field(default=0.0)
    dict_coverage: float = field(default=0.0)

    @property
    def n_eligible(self) -> int:
        return len(self.eligible)

    @property
    def ok(self) -> bool:
        return not self.missing_phonemes

    def lines(self) -> list[str]:
        return [
            f"vectors: {self.n_vectors}",
            f"pronunciations: {self.n_pronunciations}",
            f"eligible: {self.n_eligible}",
            f"vector_coverage_pct: {self.vector_coverage:.2f}",
            f"dict_coverage_pct: {self.dict_coverage:.2f}",
            "missing_phonemes: " + (" ".join(self.missing_phonemes) or "-"),
        ]


def validate_resources(vectors: VectorLexicon, plex: PronouncingLexicon,
                       ftab: FeatureTable) -> ValidationReport:
    """Join the three resources.

    ``eligible`` is the set of tokens with both a vector and a pronunciation;
    ``vector_coverage`` is the share of vector tokens that are eligible and
    ``dict_coverage`` the share of dictionary words that are.
    """
    eligible = frozenset(t for t in plex.entries if t in vectors)
    missing = tuple(sorted(p for p in plex.phonemes() if p not in ftab))
    nv, np_ = len(vectors), len(plex)
    return ValidationReport(
        eligible=eligible,
        missing_phonemes=missing,
        n_vectors=nv,
        n_pronunciations=np_,
        vector_coverage=100.0 * len(eligible) / nv if nv else 0.0,
        dict_coverage=100.0 * len(eligible) / np_ if np_ else 0.0,
    )
