"""STS corpora, Pearson correlation, the self-similarity sweep and STS runs."""

from __future__ import annotations

import csv
import logging
import math
import os
from dataclasses import asdict, dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

from .corruption import corrupt_corpus, tokenize
from .embeddings import (CorpusEmbedding, EmbeddingConfig, FrequencyModel, SentenceVector,
                         embed_corpus, similarity)
from .resources import ResourceError, VectorLexicon
from .substitution import SubstitutionTable

log = logging.getLogger(__name__)

SICK_RANGE = (1.0, 5.0)
STSB_RANGE = (0.0, 5.0)
MAX_EXCLUDED_FRACTION = 0.10


class UndefinedCorrelationError(ValueError):
    pass


@dataclass(frozen=True)
class SentencePair:
    id: str
    sentence_a: str
    sentence_b: str
    gold_score: float


class PairList(list):
    """Parsed pairs plus the rows that were rejected, as ``(line, reason)``."""

    def __init__(self, pairs=(), skipped=()):
        super().__init__(pairs)
        self.skipped = list(skipped)


def _check_score(raw: str, bounds: tuple[float, float]) -> float | None:
    try:
        score = float(raw)
    except ValueError:
        return None
    lo, hi = bounds
    return score if lo <= score <= hi and math.isfinite(score) else None


def _finish(path, pairs, skipped) -> PairList:
    for lineno, reason in skipped:
        log.warning("%s:%d skipped: %s", path, lineno, reason)
    if not pairs:
        raise ResourceError(f"{path}: no valid sentence pairs")
    return PairList(pairs, skipped)


def _read_lines(path) -> list[str]:
    try:
        with open(path, encoding="utf-8", errors="replace", newline="") as fh:
            return fh.read().splitlines()
    except OSError as exc:
        raise ResourceError(f"cannot read {path}: {exc}") from exc


def load_sick(path: str | os.PathLike) -> PairList:
    """SICK TSV with a header naming pair_ID, sentence_A, sentence_B, relatedness_score."""
    lines = _read_lines(path)
    if not lines:
        raise ResourceError(f"{path}: empty file")
    header = lines[0].split("\t")
    try:
        cols = [header.index(c) for c in ("pair_ID", "sentence_A", "sentence_B",
                                          "relatedness_score")]
    except ValueError:
        raise ResourceError(f"{path}: header lacks SICK columns") from None
    pairs, skipped = [], []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        fields = line.split("\t")
        if len(fields) <= max(cols):
            skipped.append((lineno, "missing columns"))
            continue
        pid, a, b, raw = (fields[c] for c in cols)
        score = _check_score(raw, SICK_RANGE)
        if score is None:
            skipped.append((lineno, f"score {raw!r} outside {SICK_RANGE}"))
            continue
        pairs.append(SentencePair(pid, a, b, score))
    return _finish(path, pairs, skipped)


def load_stsb(path: str | os.PathLike) -> PairList:
    """STS-benchmark TSV: genre, filename, year, index, score, sentence1, sentence2[, ...]."""
    pairs, skipped = [], []
    for lineno, line in enumerate(_read_lines(path), start=1):
        if not line.strip():
            continue
        fields = line.split("\t")
        if len(fields) < 7:
            skipped.append((lineno, "missing columns"))
            continue
        score = _check_score(fields[4], STSB_RANGE)
        if score is None:
            skipped.append((lineno, f"score {fields[4]!r} outside {STSB_RANGE}"))
            continue
        pairs.append(SentencePair(str(lineno), fields[5], fields[6], score))
    return _finish(path, pairs, skipped)


def load_pairs(dataset: str, path) -> PairList:
    if dataset == "sick":
        return load_sick(path)
    if dataset == "stsb":
        return load_stsb(path)
    raise ValueError(f"unknown dataset {dataset!r}")


def pearson(x: Sequence[float], y: Sequence[float]) -> float:
    """Sample Pearson correlation coefficient."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError("inputs must be 1-d and of equal length")
    if len(x) < 2:
        raise ValueError("need at least two points")
    dx = x - x.mean()
    dy = y - y.mean()
    sxx, syy = dx @ dx, dy @ dy
    if sxx == 0 or syy == 0:
        raise UndefinedCorrelationError("correlation is undefined for a constant input")
    return float(np.clip((dx @ dy) / math.sqrt(sxx * syy), -1.0, 1.0))


# ---------------------------------------------------------------------------
# Self-similarity sweep
# ---------------------------------------------------------------------------


def wer_grid(spec: str) -> list[float]:
    """``"0:50:5"`` -> [0.0, 0.05, ..., 0.5] (percent start:stop:step, inclusive)."""
    parts = spec.split(":")
    if len(parts) == 3:
        start, stop, step = (float(p) for p in parts)
        if step <= 0:
            raise ValueError("grid step must be positive")
        n = int(math.floor((stop - start) / step + 1e-9)) + 1
        return [round((start + i * step) / 100.0, 10) for i in range(n)]
    return [float(p) / 100.0 for p in spec.split(",")]


def _tokens(lines: Iterable[str]) -> list[list[str]]:
    return [tokenize(line).cores for line in lines]


def robustness_sweep(lines: Sequence[str], table: SubstitutionTable, lex: VectorLexicon,
                     configs: Sequence[EmbeddingConfig], wers: Sequence[float], seed: int,
                     freq: FrequencyModel | None = None, per_sentence: bool = False,
                     digest: str = "") -> list[dict]:
    """Mean similarity between each sentence and its corrupted version, per method and WER.

    All WER levels share one seeded corruption plan, so higher rates extend
    the substitutions of lower ones.  Subspace similarities are normalized
    so an unchanged sentence scores 1.
    """
    clean_tokens = _tokens(lines)
    clean = {cfg.method: embed_corpus(clean_tokens, lex, cfg, freq) for cfg in configs}
    rows = []
    for wer in wers:
        result = corrupt_corpus(lines, table, wer, seed, per_sentence=per_sentence)
        noisy_tokens = [s.cores for s in (tokenize(l) for l in result.lines)]
        for cfg in configs:
            noisy = embed_corpus(noisy_tokens, lex, cfg, freq)
            sims, excluded = _paired_similarities(clean[cfg.method], noisy, normalized=True)
            rows.append({
                "method": cfg.method,
                "wer": wer,
                "mean_similarity": float(np.mean(sims)) if len(sims) else float("nan"),
                "n_sentences": len(sims),
                "n_excluded": excluded,
                "substituted": result.n_substituted,
                "eligible": result.n_eligible,
                "realized_wer_all": result.realized_wer_all,
                "seed": seed,
                "config_digest": digest,
            })
    return rows


def external_sweep(clean: Mapping[str, SentenceVector],
                   noisy_by_wer: Mapping[float, Mapping[str, SentenceVector]],
                   seed: int, digest: str = "") -> list[dict]:
    """Sweep rows for sentence vectors produced outside this package.

    ``clean`` and each corrupted set are keyed by sentence id (line index).
    """
    rows = []
    for wer in sorted(noisy_by_wer):
        noisy = noisy_by_wer[wer]
        missing = set(clean) ^ set(noisy)
        if missing:
            raise ResourceError(f"external vectors at wer={wer} disagree on ids, e.g. "
                                f"{sorted(missing)[:3]}")
        ids = sorted(clean)
        left = CorpusEmbedding([clean[i] for i in ids], "external")
        right = CorpusEmbedding([noisy[i] for i in ids], "external")
        sims, excluded = _paired_similarities(left, right)
        rows.append({
            "method": "external", "wer": wer,
            "mean_similarity": float(np.mean(sims)) if len(sims) else float("nan"),
            "n_sentences": len(sims), "n_excluded": excluded, "substituted": "",
            "eligible": "", "realized_wer_all": "", "seed": seed, "config_digest": digest,
        })
    return rows


def _paired_similarities(left: CorpusEmbedding, right: CorpusEmbedding,
                         normalized: bool = False) -> tuple[np.ndarray, int]:
    sims, excluded = [], 0
    for r1, r2 in zip(left.reps, right.reps):
        if r1.degenerate or r2.degenerate:
            excluded += 1
            continue
        sims.append(similarity(r1, r2, normalized))
    return np.array(sims), excluded


# ---------------------------------------------------------------------------
# STS evaluation
# ---------------------------------------------------------------------------


@dataclass
class EvalResult:
    method: str
    dataset: str
    split: str
    wer: float
    pcc: float
    n_pairs: int
    n_excluded_degenerate: int
    seed: int
    config_digest: str = ""
    repeats: int = 1
    pcc_sd: float = 0.0
    ratio_to_clean: float | None = None

    def __post_init__(self):
        if self.n_pairs <= 0:
            raise ValueError("EvalResult needs at least one pair")

    @property
    def pcc_x100(self) -> float:
        return 100.0 * self.pcc

    def row(self) -> dict:
        d = asdict(self)
        d["pcc_x100"] = self.pcc_x100
        return d


def pair_similarities(pairs: Sequence[SentencePair], table: SubstitutionTable | None,
                      lex: VectorLexicon, cfg: EmbeddingConfig, wer: float, seed: int,
                      freq: FrequencyModel | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Per-pair similarity and degenerate mask after corrupting both sides.

    ``wer == 0`` skips corruption entirely, so the seed has no effect.
    """
    if wer > 0 and table is None:
        raise ValueError("a substitution table is required for wer > 0")
    noisy = corrupted_pairs(pairs, table, wer, seed) if wer > 0 else pairs
    lines = [p.sentence_a for p in noisy] + [p.sentence_b for p in noisy]
    emb = embed_corpus(_tokens(lines), lex, cfg, freq)
    n = len(pairs)
    sims = np.zeros(n)
    bad = np.zeros(n, dtype=bool)
    for i in range(n):
        ra, rb = emb.reps[i], emb.reps[n + i]
        if ra.degenerate or rb.degenerate:
            bad[i] = True
        else:
            sims[i] = similarity(ra, rb)
    return sims, bad


def pair_key(split: str, pair_id: str, side: str) -> str:
    """Sentence id used for externally embedded pair sentences."""
    return f"{split}:{pair_id}/{side}"


def corrupted_pairs(pairs: Sequence[SentencePair], table: SubstitutionTable, wer: float,
                    seed: int) -> list[SentencePair]:
    """The pairs with both sides corrupted exactly as :func:`pair_similarities` does."""
    lines = [p.sentence_a for p in pairs] + [p.sentence_b for p in pairs]
    if wer > 0:
        lines = corrupt_corpus(lines, table, wer, seed).lines
    n = len(pairs)
    return [SentencePair(p.id, lines[i], lines[n + i], p.gold_score) for i, p in enumerate(pairs)]


def external_similarities(pairs: Sequence[SentencePair], vectors: Mapping[str, SentenceVector],
                          split: str) -> tuple[np.ndarray, np.ndarray]:
    """Similarities from precomputed vectors keyed by :func:`pair_key`."""
    sims = np.zeros(len(pairs))
    bad = np.zeros(len(pairs), dtype=bool)
    for i, p in enumerate(pairs):
        try:
            va = vectors[pair_key(split, p.id, "a")]
            vb = vectors[pair_key(split, p.id, "b")]
        except KeyError as exc:
            raise ResourceError(f"no external vector for {exc.args[0]}") from None
        if va.degenerate or vb.degenerate:
            bad[i] = True
        else:
            sims[i] = similarity(va, vb)
    return sims, bad


def score(pairs: Sequence[SentencePair], sims: np.ndarray, bad: np.ndarray, *, method: str,
          dataset: str, split: str, wer: float, seed: int, digest: str = "") -> EvalResult:
    """PCC against gold scores over the non-degenerate pairs."""
    n_bad = int(bad.sum())
    if n_bad > MAX_EXCLUDED_FRACTION * len(pairs):
        raise ValueError(f"{n_bad} of {len(pairs)} pairs are degenerate (limit 10%)")
    keep = ~bad
    gold = np.array([p.gold_score for p in pairs])[keep]
    return EvalResult(method, dataset, split, wer, pearson(sims[keep], gold),
                      int(keep.sum()), n_bad, seed, digest)


def sts_run(pairs: Sequence[SentencePair], table: SubstitutionTable | None, lex: VectorLexicon,
            cfg: EmbeddingConfig, wer: float, seed: int, *, dataset: str = "",
            split: str = "all", freq: FrequencyModel | None = None,
            digest: str = "") -> EvalResult:
    sims, bad = pair_similarities(pairs, table, lex, cfg, wer, seed, freq)
    return score(pairs, sims, bad, method=cfg.method, dataset=dataset, split=split,
                 wer=wer, seed=seed, digest=digest)


def sts_evaluate(splits: Mapping[str, Sequence[SentencePair]], table: SubstitutionTable | None,
                 lex: VectorLexicon, cfg: EmbeddingConfig, wers: Sequence[float], seed: int, *,
                 dataset: str, repeats: int = 1, freq: FrequencyModel | None = None,
                 digest: str = "") -> list[EvalResult]:
    """Evaluate every split and their pool at each WER.

    Splits are corrupted and embedded together; correlations are then taken
    per split and over the pool.  With ``repeats > 1`` corrupted runs use
    seeds ``seed .. seed + repeats - 1`` and report mean and sd of the PCC.
    """
    names = list(splits)
    pooled = [p for name in names for p in splits[name]]
    bounds, start = {}, 0
    for name in names:
        bounds[name] = (start, start + len(splits[name]))
        start += len(splits[name])
    groups = {name: slice(*bounds[name]) for name in names}
    if len(names) > 1:
        groups["pooled"] = slice(0, len(pooled))

    results: list[EvalResult] = []
    for wer in wers:
        n_runs = 1 if wer == 0 else repeats
        per_group: dict[str, list[EvalResult]] = {g: [] for g in groups}
        for k in range(n_runs):
            sims, bad = pair_similarities(pooled, table, lex, cfg, wer, seed + k, freq)
            for g, sl in groups.items():
                per_group[g].append(score(pooled[sl], sims[sl], bad[sl], method=cfg.method,
                                          dataset=dataset, split=g, wer=wer, seed=seed,
                                          digest=digest))
        for g, runs in per_group.items():
            res = runs[0]
            if len(runs) > 1:
                pccs = [r.pcc for r in runs]
                res.pcc = float(np.mean(pccs))
                res.pcc_sd = float(np.std(pccs, ddof=1))
                res.repeats = len(runs)
            results.append(res)
    add_clean_ratios(results)
    return results


def add_clean_ratios(results: Sequence[EvalResult]) -> None:
    """Fill ``ratio_to_clean`` = PCC_wer / PCC_0 where a clean result exists."""
    clean = {(r.method, r.dataset, r.split): r.pcc for r in results if r.wer == 0}
    for r in results:
        base = clean.get((r.method, r.dataset, r.split))
        if base:
            r.ratio_to_clean = r.pcc / base


# ---------------------------------------------------------------------------
# CSV output
# ---------------------------------------------------------------------------

SWEEP_COLUMNS = ["method", "wer", "mean_similarity", "n_sentences", "n_excluded", "substituted",
                 "eligible", "realized_wer_all", "seed", "config_digest"]
STS_COLUMNS = ["method", "dataset", "split", "wer", "pcc", "pcc_x100", "pcc_sd", "repeats",
               "ratio_to_clean", "n_pairs", "n_excluded_degenerate", "seed", "config_digest"]


def write_csv(rows: Iterable[dict], columns: Sequence[str], path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=list(columns), extrasaction="ignore",
                           lineterminator="\n")
        w.writeheader()
        for row in rows:
            w.writerow({k: _fmt(v) for k, v in row.items()})


def _fmt(v):
    if v is None:
        return ""
    return f"{v:.10g}" if isinstance(v, float) else v
