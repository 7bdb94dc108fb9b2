"""Sentence representations built from word vectors, and their similarities.

Vector methods: unweighted average (optionally without stopwords), SIF and
uSIF.  Subspace method: span of the leading singular directions of a
sentence's word matrix, compared through principal angles.
"""

from __future__ import annotations

import logging
import math
import os
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .resources import ResourceError, VectorLexicon

log = logging.getLogger(__name__)

METHODS = ("avg", "avg-nostop", "sif", "usif", "subspace")
SIF_A = 1e-3
USIF_M = 5
SUBSPACE_RANK = 4


@dataclass(frozen=True)
class SentenceVector:
    values: np.ndarray
    method: str = ""
    sid: str | None = None
    degenerate: bool = False


@dataclass(frozen=True)
class SentenceSubspace:
    basis: np.ndarray  # d x r, orthonormal columns
    n_rank: int
    sid: str | None = None
    degenerate: bool = False

    @property
    def rank(self) -> int:
        return self.basis.shape[1]


@dataclass(frozen=True)
class CommonComponentModel:
    components: np.ndarray  # m x d, unit rows
    weights: np.ndarray
    singular_values: np.ndarray
    mode: str


class FrequencyModel:
    """Unigram probabilities ``p(w) = count / total``."""

    def __init__(self, counts: Mapping[str, int], n_sentences: int | None = None):
        self.counts = {w: int(c) for w, c in counts.items() if c > 0}
        self.total = sum(self.counts.values())
        if self.total <= 0:
            raise ValueError("frequency model needs at least one count")
        self.n_sentences = n_sentences
        self._min_p = min(self.counts.values()) / self.total

    @classmethod
    def from_corpus(cls, sentences: Iterable[Sequence[str]]) -> "FrequencyModel":
        counts: Counter = Counter()
        n = 0
        for toks in sentences:
            counts.update(toks)
            n += 1
        return cls(counts, n_sentences=n)

    @classmethod
    def from_file(cls, path: str | os.PathLike) -> "FrequencyModel":
        """``word count`` per line (whitespace separated)."""
        counts: Counter = Counter()
        with open(path, encoding="utf-8") as fh:
            for line in fh:
                parts = line.split()
                if len(parts) != 2:
                    continue
                try:
                    counts[parts[0].lower()] += int(float(parts[1]))
                except ValueError:
                    continue
        return cls(counts)

    def __len__(self) -> int:
        return len(self.counts)

    def p(self, w: str) -> float:
        return self.counts.get(w, 0) / self.total

    @property
    def min_probability(self) -> float:
        return self._min_p

    @property
    def mean_sentence_length(self) -> float | None:
        if not self.n_sentences:
            return None
        return self.total / self.n_sentences


class _Weights(dict):
    def __init__(self, items, default):
        super().__init__(items)
        self.default = default

    def __missing__(self, key):
        return self.default


def sif_weights(freq: FrequencyModel, a: float = SIF_A) -> Mapping[str, float]:
    """``a / (a + p(w))``; unseen words get weight 1."""
    if not a > 0:
        raise ValueError("a must be positive")
    return _Weights(((w, a / (a + c / freq.total)) for w, c in freq.counts.items()), 1.0)


def usif_parameter(freq: FrequencyModel, sentence_length: float | None = None) -> float:
    """uSIF's closed-form ``a`` from vocabulary size and mean sentence length ``n``.

    A word is "frequent" if its probability exceeds ``1 - (1 - 1/V)**n``;
    with ``alpha`` the share of such words and ``Z = V / 2``,
    ``a = (1 - alpha) / (alpha * Z)``.
    """
    n = sentence_length if sentence_length is not None else freq.mean_sentence_length
    if n is None:
        n = 11.0  # default of the uSIF reference code
    vocab = len(freq)
    threshold = 1.0 - (1.0 - 1.0 / vocab) ** n
    alpha = sum(1 for c in freq.counts.values() if c / freq.total > threshold) / vocab
    if alpha == 0.0:
        raise ValueError("no word exceeds the uSIF frequency threshold; cannot set a")
    return (1.0 - alpha) / (alpha * 0.5 * vocab)


def usif_weights(freq: FrequencyModel, a: float) -> Mapping[str, float]:
    """``a / (a/2 + p(w))``; unseen words take the smallest observed probability."""
    unseen = a / (0.5 * a + freq.min_probability)
    return _Weights(((w, a / (0.5 * a + c / freq.total)) for w, c in freq.counts.items()), unseen)


# ---------------------------------------------------------------------------
# Per-sentence constructions
# ---------------------------------------------------------------------------


def _resolve(lex: VectorLexicon, tokens: Iterable[str],
             stopwords: frozenset[str] | set[str] | None = None) -> list[str]:
    found = [t for t in tokens if t in lex]
    if stopwords:
        content = [t for t in found if t not in stopwords]
        if content:
            return content
    return found


def _weighted_mean(lex: VectorLexicon, words: list[str], method: str,
                   weights: Mapping[str, float] | None = None) -> SentenceVector:
    if not words:
        return SentenceVector(np.zeros(lex.dim), method, degenerate=True)
    mat = np.vstack([lex[w] for w in words])
    if weights is not None:
        mat = mat * np.array([weights[w] for w in words])[:, None]
    return SentenceVector(mat.mean(axis=0), method)


def embed_average(lex: VectorLexicon, tokens: Iterable[str],
                  stopwords: frozenset[str] | set[str] | None = None) -> SentenceVector:
    """Mean of the word vectors.

    With ``stopwords`` those words are dropped first, unless that would
    leave nothing.  A sentence with no known word yields a zero vector
    flagged ``degenerate``.
    """
    method = "avg-nostop" if stopwords else "avg"
    return _weighted_mean(lex, _resolve(lex, tokens, stopwords), method)


def embed_sif(lex: VectorLexicon, freq: FrequencyModel, tokens: Iterable[str],
              a: float = SIF_A, weights: Mapping[str, float] | None = None) -> SentenceVector:
    """SIF-weighted mean, before common-component removal."""
    if weights is None:
        weights = sif_weights(freq, a)
    return _weighted_mean(lex, _resolve(lex, tokens), "sif", weights)


def embed_usif(lex: VectorLexicon, freq: FrequencyModel, tokens: Iterable[str],
               weights: Mapping[str, float] | None = None) -> SentenceVector:
    """uSIF-weighted mean, before common-component removal."""
    if weights is None:
        weights = usif_weights(freq, usif_parameter(freq))
    return _weighted_mean(lex, _resolve(lex, tokens), "usif", weights)


def embed_subspace(lex: VectorLexicon, tokens: Iterable[str], n_rank: int = SUBSPACE_RANK,
                   stopwords: frozenset[str] | set[str] | None = None) -> SentenceSubspace:
    """Orthonormal basis of the top singular directions of the word matrix.

    The matrix is not centred, so the subspace passes through the origin.
    Its rank is ``min(n_rank, number of distinct known words)``.
    """
    if n_rank < 1:
        raise ValueError("n_rank must be >= 1")
    words = _resolve(lex, tokens, stopwords)
    if not words:
        return SentenceSubspace(np.zeros((lex.dim, 0)), n_rank, degenerate=True)
    mat = np.column_stack([lex[w] for w in words])
    r = min(n_rank, len(set(words)), lex.dim)
    u, _, _ = np.linalg.svd(mat, full_matrices=False)
    return SentenceSubspace(u[:, :r].copy(), n_rank)


# ---------------------------------------------------------------------------
# Common component removal
# ---------------------------------------------------------------------------


def _as_matrix(vectors) -> np.ndarray:
    rows = [v.values if isinstance(v, SentenceVector) else np.asarray(v, dtype=np.float64)
            for v in vectors]
    return np.vstack(rows) if rows else np.zeros((0, 0))


def fit_common_components(vectors, mode: str = "sif", m: int = USIF_M) -> CommonComponentModel:
    """Leading right singular directions of the stacked (uncentred) sentence matrix.

    ``sif`` keeps one direction with weight 1; ``usif`` keeps ``m`` with
    weights ``s_i**2 / sum(s_j**2 for j <= m)``.
    """
    if mode not in ("sif", "usif"):
        raise ValueError(f"unknown mode {mode!r}")
    if mode == "sif":
        m = 1
    mat = _as_matrix(vectors)
    if mat.shape[0] < m:
        raise ValueError(f"need at least {m} vectors to fit {m} components, got {mat.shape[0]}")
    _, s, vt = np.linalg.svd(mat, full_matrices=False)
    comps, s = vt[:m], s[:m]
    if mode == "sif":
        weights = np.ones(1)
    else:
        energy = np.sum(s ** 2)
        weights = s ** 2 / energy if energy > 0 else np.zeros(m)
    return CommonComponentModel(comps, weights, s, mode)


def remove_common_components(v: SentenceVector, ccm: CommonComponentModel) -> SentenceVector:
    """``v - sum_i lambda_i (c_i . v) c_i``"""
    x = v.values
    if x.shape[-1] != ccm.components.shape[1]:
        raise ValueError("dimension mismatch")
    proj = ccm.components @ x
    out = x - (ccm.weights * proj) @ ccm.components
    return SentenceVector(out, v.method, v.sid, v.degenerate)


# ---------------------------------------------------------------------------
# Similarities
# ---------------------------------------------------------------------------


def cosine_similarity(u: SentenceVector, v: SentenceVector) -> float:
    """Cosine of the angle between two sentence vectors; 0 for a zero vector."""
    a, b = u.values, v.values
    if a.shape != b.shape:
        raise ValueError("dimension mismatch")
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0 or nb == 0:
        return 0.0
    return float(np.clip((a @ b) / (na * nb), -1.0, 1.0))


def principal_angle_similarity(s1: SentenceSubspace, s2: SentenceSubspace,
                               normalized: bool = False) -> float:
    """Root sum of squared cosines of the principal angles between the spans.

    With ``normalized=True`` the result is divided by ``sqrt(min(r1, r2))``
    so identical subspaces score 1.
    """
    if s1.basis.shape[0] != s2.basis.shape[0]:
        raise ValueError("ambient dimensions differ")
    k = min(s1.rank, s2.rank)
    if k == 0:
        return 0.0
    sv = np.linalg.svd(s1.basis.T @ s2.basis, compute_uv=False)[:k]
    sim = math.sqrt(float(np.sum(sv ** 2)))
    return sim / math.sqrt(k) if normalized else sim


def similarity(r1, r2, normalized: bool = False) -> float:
    if isinstance(r1, SentenceSubspace):
        return principal_angle_similarity(r1, r2, normalized)
    return cosine_similarity(r1, r2)


# ---------------------------------------------------------------------------
# Corpus-level pipeline
# ---------------------------------------------------------------------------


@dataclass
class EmbeddingConfig:
    method: str
    a: float = SIF_A
    rank: int = SUBSPACE_RANK
    m: int = USIF_M
    stopwords: frozenset[str] | None = None
    usif_a: float | None = None  # computed from the frequency model when None

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}; choose from {', '.join(METHODS)}")
        if self.method == "avg-nostop" and not self.stopwords:
            raise ValueError("avg-nostop needs a non-empty stopword list")


@dataclass
class CorpusEmbedding:
    reps: list
    method: str
    ccm: CommonComponentModel | None = None
    meta: dict = field(default_factory=dict)

    @property
    def degenerate(self) -> list[bool]:
        return [r.degenerate for r in self.reps]


def embed_corpus(sentences: Sequence[Sequence[str]], lex: VectorLexicon, cfg: EmbeddingConfig,
                 freq: FrequencyModel | None = None,
                 ids: Sequence[str] | None = None) -> CorpusEmbedding:
    """Embed a list of tokenized sentences.

    SIF and uSIF run in two passes: weighting every sentence, then fitting
    and removing common components over the non-degenerate vectors.
    """
    ids = list(ids) if ids is not None else [str(i) for i in range(len(sentences))]
    method = cfg.method
    meta: dict = {"method": method}
    if method == "subspace":
        reps = [embed_subspace(lex, toks, cfg.rank, cfg.stopwords) for toks in sentences]
        reps = [SentenceSubspace(r.basis, r.n_rank, sid, r.degenerate) for r, sid in zip(reps, ids)]
        meta["rank"] = cfg.rank
        return CorpusEmbedding(reps, method, meta=meta)
    if method in ("avg", "avg-nostop"):
        stop = cfg.stopwords if method == "avg-nostop" else None
        vecs = [embed_average(lex, toks, stop) for toks in sentences]
        return CorpusEmbedding(_with_ids(vecs, ids), method, meta=meta)
    if freq is None:
        freq = FrequencyModel.from_corpus(sentences)
    if method == "sif":
        weights = sif_weights(freq, cfg.a)
        vecs = [embed_sif(lex, freq, toks, weights=weights) for toks in sentences]
        meta["a"] = cfg.a
        mode, m = "sif", 1
    else:
        a = cfg.usif_a if cfg.usif_a is not None else usif_parameter(freq)
        weights = usif_weights(freq, a)
        vecs = [embed_usif(lex, freq, toks, weights=weights) for toks in sentences]
        meta["a"] = a
        meta["a_estimator"] = "usif-closed-form(vocab, mean sentence length)"
        mode, m = "usif", cfg.m
    usable = [v for v in vecs if not v.degenerate]
    ccm = fit_common_components(usable, mode, m)
    vecs = [v if v.degenerate else remove_common_components(v, ccm) for v in vecs]
    meta["m"] = m
    return CorpusEmbedding(_with_ids(vecs, ids), method, ccm, meta)


def _with_ids(vecs: list[SentenceVector], ids: Sequence[str]) -> list[SentenceVector]:
    return [SentenceVector(v.values, v.method, sid, v.degenerate) for v, sid in zip(vecs, ids)]


# ---------------------------------------------------------------------------
# External vectors
# ---------------------------------------------------------------------------


def save_embeddings(vectors: Iterable[SentenceVector], path: str | os.PathLike) -> None:
    """TSV ``id<TAB>v1 v2 ... vd`` with 9 significant digits."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for v in vectors:
            fh.write(f"{v.sid}\t" + " ".join(f"{x:.9g}" for x in v.values) + "\n")


def save_subspaces(subspaces: Iterable[SentenceSubspace], path: str | os.PathLike) -> None:
    """TSV ``id<TAB>rank<TAB>basis`` with the d x r basis flattened column by column."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for s in subspaces:
            flat = s.basis.flatten(order="F")
            fh.write(f"{s.sid}\t{s.rank}\t" + " ".join(f"{x:.9g}" for x in flat) + "\n")


def load_external_embeddings(path: str | os.PathLike) -> dict[str, SentenceVector]:
    out: dict[str, SentenceVector] = {}
    dim = None
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\r\n")
            if not line.strip():
                continue
            sid, sep, rest = line.partition("\t")
            if not sep:
                raise ResourceError(f"{path}:{lineno}: expected 'id<TAB>values'")
            try:
                values = np.array(rest.split(), dtype=np.float64)
            except ValueError:
                raise ResourceError(f"{path}:{lineno}: non-numeric value") from None
            if dim is None:
                dim = len(values)
            if len(values) != dim or dim == 0:
                raise ResourceError(
                    f"{path}:{lineno}: dimension {len(values)} differs from {dim}")
            if sid in out:
                raise ResourceError(f"{path}:{lineno}: duplicate id {sid!r}")
            out[sid] = SentenceVector(values, "external", sid, degenerate=not np.any(values))
    if not out:
        raise ResourceError(f"{path}: no vectors")
    return out
