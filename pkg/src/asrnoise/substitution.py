"""Per-word substitution distributions: construction, storage and sampling.

For a source word, candidates are its semantically nearest eligible words
whose phonological distance is within a threshold.  Each candidate gets
probability proportional to ``exp(-d / sigma**2)`` where ``sigma`` is the
mean distance of the kept candidates.
"""

from __future__ import annotations

import concurrent.futures as cf
import enum
import itertools
import logging
import math
import multiprocessing as mp
import os
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .neighbors import NeighborIndex, NeighborList
from .phonology import PhonemeCostModel, ZeroPolicy, batch_word_distances
from .resources import FeatureTable, PronouncingLexicon, ResourceError, VectorLexicon

log = logging.getLogger(__name__)

MAGIC = "ASRSUBST"
FORMAT_VERSION = 1
BLOCK_SIZE = 64
_END = "#end"


class SigmaMode(str, enum.Enum):
    MEAN_CLUSTER = "mean_cluster"  # exp(-d / sigma^2)
    MEAN_CLUSTER_LINEAR = "mean_cluster_linear"  # exp(-d / sigma)


class TableFormatError(ValueError):
    pass


@dataclass(frozen=True)
class Candidate:
    token: str
    distance: float
    probability: float


@dataclass(frozen=True)
class CandidateSet:
    candidates: tuple[Candidate, ...]
    sigma: float

    def __len__(self) -> int:
        return len(self.candidates)

    @property
    def tokens(self) -> list[str]:
        return [c.token for c in self.candidates]

    @property
    def probabilities(self) -> list[float]:
        return [c.probability for c in self.candidates]

    @property
    def uniform(self) -> bool:
        return self.sigma == 0.0


@dataclass(frozen=True)
class TableConfig:
    n_semantic: int = 1000
    thresh: float = 6.0
    thresh_quantile: float | None = None
    sigma_mode: SigmaMode = SigmaMode.MEAN_CLUSTER
    semantic_weight: float = 0.0
    zero_policy: ZeroPolicy = ZeroPolicy.ZERO_COUNTS_AS_DIFFERENCE
    indel_cost: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "sigma_mode", SigmaMode(self.sigma_mode))
        object.__setattr__(self, "zero_policy", ZeroPolicy(self.zero_policy))
        if self.n_semantic < 1:
            raise ValueError("n_semantic must be >= 1")
        if self.thresh_quantile is None and not self.thresh > 0:
            raise ValueError("thresh must be > 0")
        if self.thresh_quantile is not None and not 0 < self.thresh_quantile <= 1:
            raise ValueError("thresh_quantile must be in (0, 1]")
        if self.semantic_weight < 0:
            raise ValueError("semantic_weight must be >= 0")

    def cost_model(self, ftab: FeatureTable) -> PhonemeCostModel:
        return PhonemeCostModel(ftab, indel_cost=self.indel_cost, zero_policy=self.zero_policy)


@dataclass(frozen=True)
class SubstitutionTable:
    meta: Mapping[str, str]
    entries: Mapping[str, CandidateSet] = field(default_factory=dict)

    def __contains__(self, token: object) -> bool:
        return token in self.entries

    def __getitem__(self, token: str) -> CandidateSet:
        return self.entries[token]

    def __len__(self) -> int:
        return len(self.entries)

    def get(self, token: str) -> CandidateSet | None:
        return self.entries.get(token)


# ---------------------------------------------------------------------------
# Construction
# ---------------------------------------------------------------------------


def pmf(distances: Sequence[float], sigma_mode: SigmaMode = SigmaMode.MEAN_CLUSTER
        ) -> tuple[np.ndarray, float]:
    """Normalized probabilities and the sigma used, for one cluster of distances."""
    d = np.asarray(distances, dtype=np.float64)
    sigma = float(d.mean())
    if sigma == 0.0:
        return np.full(len(d), 1.0 / len(d)), 0.0
    # shifting by the minimum leaves the normalized result unchanged; dividing
    # by sigma twice avoids sigma**2 underflowing for tiny distances
    z = (d - d.min()) / sigma
    if SigmaMode(sigma_mode) is SigmaMode.MEAN_CLUSTER:
        z = z / sigma
    w = np.exp(-z)
    return w / w.sum(), sigma


def build_candidate_set(w: str, nbrs: NeighborList, plex: PronouncingLexicon,
                        cost: PhonemeCostModel, thresh: float,
                        sigma_mode: SigmaMode = SigmaMode.MEAN_CLUSTER,
                        semantic_weight: float = 0.0) -> CandidateSet | None:
    """Candidate replacements for ``w`` drawn from its semantic neighbours.

    Returns ``None`` when no neighbour is within ``thresh``.
    """
    if not thresh > 0:
        raise ValueError("thresh must be > 0")
    pairs = [(t, ds) for t, ds in nbrs.neighbors if t in plex and t != w]
    if not pairs or w not in plex:
        return None
    d_phono = batch_word_distances(cost, plex, w, [t for t, _ in pairs])
    kept = [(t, dp + semantic_weight * ds)
            for (t, ds), dp in zip(pairs, d_phono) if dp <= thresh]
    if not kept:
        return None
    kept.sort(key=lambda c: (c[1], c[0]))
    probs, sigma = pmf([d for _, d in kept], sigma_mode)
    return CandidateSet(
        tuple(Candidate(t, float(d), float(p)) for (t, d), p in zip(kept, probs)), sigma)


def eligible_vocabulary(corpus_vocab: Iterable[str], lex: VectorLexicon,
                        plex: PronouncingLexicon) -> list[str]:
    return sorted({t for t in corpus_vocab if t in lex and t in plex})


def _q(x: float) -> float:
    return float(f"{x:.12g}")


def _canonical(cs: CandidateSet) -> CandidateSet:
    """Round every real to the 12 significant digits used on disk."""
    return CandidateSet(
        tuple(Candidate(c.token, _q(c.distance), _q(c.probability)) for c in cs.candidates),
        _q(cs.sigma))


_STATE: dict = {}


def _init_worker(state: dict) -> None:
    _STATE.clear()
    _STATE.update(state)


def _phono_block(words: list[str]) -> list[np.ndarray]:
    st = _STATE
    out = []
    for nl in st["index"].query_block(words, st["n"]):
        toks = [t for t in nl.tokens if t in st["plex"]]
        out.append(batch_word_distances(st["cost"], st["plex"], nl.source, toks))
    return out


def _candidate_block(words: list[str]) -> list[tuple[str, CandidateSet | None]]:
    st = _STATE
    out = []
    for nl in st["index"].query_block(words, st["n"]):
        cs = build_candidate_set(nl.source, nl, st["plex"], st["cost"], st["thresh"],
                                 st["sigma_mode"], st["semantic_weight"])
        out.append((nl.source, cs))
    return out


def _map_blocks(fn, blocks: list[list[str]], state: dict, workers: int) -> list:
    if workers <= 1 or len(blocks) <= 1:
        _init_worker(state)
        try:
            return [fn(b) for b in blocks]
        finally:
            _STATE.clear()
    ctx = mp.get_context("fork") if "fork" in mp.get_all_start_methods() else None
    with cf.ProcessPoolExecutor(max_workers=workers, mp_context=ctx,
                                initializer=_init_worker, initargs=(state,)) as ex:
        return list(ex.map(fn, blocks))


def build_table(corpus_vocab: Iterable[str], lex: VectorLexicon, plex: PronouncingLexicon,
                ftab: FeatureTable, cfg: TableConfig = TableConfig(), *,
                workers: int = 1, shard: tuple[int, int] | None = None,
                meta: Mapping[str, str] | None = None) -> SubstitutionTable:
    """Build the substitution table for every eligible word of a corpus.

    Source words are processed in fixed blocks of the sorted vocabulary, so
    the result is identical for any ``workers`` count.  ``shard=(i, k)``
    restricts the build to blocks ``b`` with ``b % k == i``; shards can be
    combined with :func:`merge_tables`.
    """
    eligible = eligible_vocabulary(corpus_vocab, lex, plex)
    if not eligible:
        raise ResourceError("empty eligible vocabulary")
    missing = sorted({p for w in eligible for pron in plex[w] for p in pron if p not in ftab})
    if missing:
        raise ResourceError(f"phonemes missing from feature table: {' '.join(missing)}")
    cost = cfg.cost_model(ftab)
    index = NeighborIndex(lex, eligible)
    blocks = [eligible[i:i + BLOCK_SIZE] for i in range(0, len(eligible), BLOCK_SIZE)]
    if shard is not None:
        i, k = shard
        if not (k >= 1 and 0 <= i < k):
            raise ValueError(f"invalid shard {i} of {k}")
        if cfg.thresh_quantile is not None and k > 1:
            raise ValueError("quantile thresholds need the whole vocabulary; do not shard")
        blocks = blocks[i::k]
    state = dict(index=index, n=cfg.n_semantic, plex=plex, cost=cost,
                 sigma_mode=cfg.sigma_mode, semantic_weight=cfg.semantic_weight)

    thresh = cfg.thresh
    if cfg.thresh_quantile is not None:
        dists = [d for block in _map_blocks(_phono_block, blocks, state, workers) for d in block]
        pooled = np.concatenate(dists) if dists else np.zeros(0)
        if not len(pooled):
            raise ResourceError("no neighbour pairs to take a quantile over")
        thresh = float(np.quantile(pooled, cfg.thresh_quantile))
        if thresh <= 0:
            # a zero threshold would keep only homophones; nudge to the smallest positive distance
            positive = pooled[pooled > 0]
            thresh = float(positive.min()) if len(positive) else 1.0
        log.info("quantile %.3f -> phonological threshold %g", cfg.thresh_quantile, thresh)
    state["thresh"] = thresh

    results = _map_blocks(_candidate_block, blocks, state, workers)
    entries = {w: _canonical(cs) for block in results for w, cs in block if cs is not None}
    full_meta = {
        "n_semantic": str(cfg.n_semantic),
        "phono_threshold": f"{thresh:.12g}",
        "thresh_mode": "absolute" if cfg.thresh_quantile is None else f"quantile({cfg.thresh_quantile:g})",
        "sigma_mode": cfg.sigma_mode.value,
        "semantic_weight": f"{cfg.semantic_weight:g}",
        "zero_policy": cost.zero_policy.value,
        "indel_policy": cost.indel_policy,
        "n_eligible": str(len(eligible)),
        "shard": "all" if shard is None else f"{shard[0]}/{shard[1]}",
    }
    full_meta.update(meta or {})
    return SubstitutionTable(dict(sorted(full_meta.items())), dict(sorted(entries.items())))


def merge_tables(tables: Sequence[SubstitutionTable]) -> SubstitutionTable:
    """Combine shard tables built with the same configuration."""
    if not tables:
        raise ValueError("nothing to merge")
    ignore = {"shard"}
    ref = {k: v for k, v in tables[0].meta.items() if k not in ignore}
    entries: dict[str, CandidateSet] = {}
    for t in tables:
        if {k: v for k, v in t.meta.items() if k not in ignore} != ref:
            raise ValueError("cannot merge tables built with different configurations")
        overlap = entries.keys() & t.entries.keys()
        if overlap:
            raise ValueError(f"shards overlap on {sorted(overlap)[:5]}")
        entries.update(t.entries)
    meta = dict(ref, shard="merged")
    return SubstitutionTable(dict(sorted(meta.items())), dict(sorted(entries.items())))


def table_report(table: SubstitutionTable) -> dict:
    """Distribution of candidate-set sizes, for threshold calibration."""
    sizes = np.array([len(cs) for cs in table.entries.values()], dtype=int)
    if not len(sizes):
        return {"entries": 0}
    counts = np.bincount(sizes)
    return {
        "entries": int(len(sizes)),
        "M_min": int(sizes.min()),
        "M_median": float(np.median(sizes)),
        "M_mean": float(sizes.mean()),
        "M_max": int(sizes.max()),
        "uniform_entries": sum(cs.uniform for cs in table.entries.values()),
        "M_histogram": {int(m): int(c) for m, c in enumerate(counts) if c},
    }


# ---------------------------------------------------------------------------
# Sampling
# ---------------------------------------------------------------------------


def sample_substitute(cs: CandidateSet, r: float) -> str:
    """Inverse-CDF draw: the first candidate whose cumulative probability exceeds ``r``."""
    if not cs.candidates:
        raise ValueError("empty candidate set")
    for c, cum in zip(cs.candidates, itertools.accumulate(cs.probabilities)):
        if cum > r:
            return c.token
    return cs.candidates[-1].token


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------


def dumps_table(table: SubstitutionTable) -> str:
    lines = [MAGIC, f"version\t{FORMAT_VERSION}"]
    for k, v in sorted(table.meta.items()):
        if "\t" in k or "\n" in k or "\n" in str(v) or "=" in k:
            raise TableFormatError(f"unserializable meta key {k!r}")
        lines.append(f"meta\t{k}={v}")
    lines.append(f"entries\t{len(table.entries)}")
    for w, cs in sorted(table.entries.items()):
        fields = [w, str(len(cs)), f"{cs.sigma:.12g}"]
        for c in cs.candidates:
            fields += [c.token, f"{c.distance:.12g}", f"{c.probability:.12g}"]
        lines.append("\t".join(fields))
    lines.append(_END)
    return "\n".join(lines) + "\n"


def save_table(table: SubstitutionTable, path: str | os.PathLike) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(dumps_table(table))


def loads_table(text: str) -> SubstitutionTable:
    lines = text.split("\n")
    if not lines or lines[0] != MAGIC:
        raise TableFormatError("not a substitution table (bad magic)")
    if len(lines) < 2 or not lines[1].startswith("version\t"):
        raise TableFormatError("missing version line")
    try:
        version = int(lines[1].split("\t", 1)[1])
    except ValueError:
        raise TableFormatError(f"bad version line {lines[1]!r}") from None
    if version != FORMAT_VERSION:
        raise TableFormatError(
            f"unsupported table version {version} (this build reads {FORMAT_VERSION})")
    meta: dict[str, str] = {}
    pos = 2
    while pos < len(lines) and lines[pos].startswith("meta\t"):
        key, _, value = lines[pos][5:].partition("=")
        meta[key] = value
        pos += 1
    if pos >= len(lines) or not lines[pos].startswith("entries\t"):
        raise TableFormatError("missing entry count")
    try:
        n = int(lines[pos].split("\t", 1)[1])
    except ValueError:
        raise TableFormatError("bad entry count") from None
    body = lines[pos + 1: pos + 1 + n]
    trailer = lines[pos + 1 + n:]
    if len(body) != n or not trailer or trailer[0] != _END or any(trailer[1:]):
        raise TableFormatError("truncated or corrupt table file")
    entries: dict[str, CandidateSet] = {}
    for lineno, line in enumerate(body, start=pos + 2):
        fields = line.split("\t")
        try:
            w, m, sigma = fields[0], int(fields[1]), float(fields[2])
            if len(fields) != 3 + 3 * m or m < 1:
                raise ValueError
            cands = tuple(
                Candidate(fields[3 + 3 * j], float(fields[4 + 3 * j]), float(fields[5 + 3 * j]))
                for j in range(m))
        except (ValueError, IndexError):
            raise TableFormatError(f"corrupt record on line {lineno}") from None
        total = math.fsum(c.probability for c in cands)
        if abs(total - 1.0) > 1e-9 or any(not 0 < c.probability <= 1 for c in cands):
            raise TableFormatError(f"line {lineno}: probabilities for {w!r} do not form a PMF")
        if w in entries:
            raise TableFormatError(f"line {lineno}: duplicate entry {w!r}")
        entries[w] = CandidateSet(cands, sigma)
    return SubstitutionTable(meta, entries)


def load_table(path: str | os.PathLike) -> SubstitutionTable:
    try:
        with open(path, encoding="utf-8", newline="") as fh:
            text = fh.read()
    except UnicodeDecodeError as exc:
        raise TableFormatError(f"{path}: not UTF-8 ({exc})") from None
    return loads_table(text)
