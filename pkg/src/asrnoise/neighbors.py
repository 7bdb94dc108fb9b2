"""Cosine distance and exact nearest-neighbour retrieval over word vectors."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .resources import VectorLexicon


@dataclass(frozen=True)
class NeighborList:
    source: str
    neighbors: tuple[tuple[str, float], ...]

    def __len__(self) -> int:
        return len(self.neighbors)

    @property
    def tokens(self) -> list[str]:
        return [t for t, _ in self.neighbors]


def cosine_distance(u, v) -> float:
    """``1 - cos(u, v)`` clamped to [0, 2]."""
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if u.shape != v.shape:
        raise ValueError(f"dimension mismatch: {u.shape} vs {v.shape}")
    nu, nv = np.linalg.norm(u), np.linalg.norm(v)
    if nu == 0 or nv == 0:
        raise ValueError("cosine distance is undefined for zero vectors")
    return float(np.clip(1.0 - (u @ v) / (nu * nv), 0.0, 2.0))


class NeighborIndex:
    """Unit-normalized matrix over a sorted eligible vocabulary.

    Sorting the vocabulary up front makes results independent of the order in
    which the eligible set was supplied.
    """

    def __init__(self, lex: VectorLexicon, eligible: Iterable[str]):
        tokens = sorted(set(eligible))
        missing = [t for t in tokens if t not in lex]
        if missing:
            raise KeyError(f"eligible tokens without vectors: {missing[:5]}")
        self.tokens = tokens
        self.position = {t: i for i, t in enumerate(tokens)}
        rows = [lex.index(t) for t in tokens]
        self.unit = lex.matrix[rows] / lex.norms[rows, None] if rows else np.zeros((0, lex.dim))
        self._tok_arr = np.array(tokens, dtype=object)

    def __len__(self) -> int:
        return len(self.tokens)

    def query_block(self, words: list[str], n: int) -> list[NeighborList]:
        """Top-``n`` neighbours for each of ``words`` with one matrix product."""
        if n < 1:
            raise ValueError("n must be >= 1")
        for w in words:
            if w not in self.position:
                raise KeyError(f"word {w!r} is not eligible")
        if not words:
            return []
        rows = np.fromiter((self.position[w] for w in words), dtype=np.intp, count=len(words))
        dist = np.clip(1.0 - self.unit[rows] @ self.unit.T, 0.0, 2.0)
        out = []
        for k, w in enumerate(words):
            d = dist[k]
            d[rows[k]] = np.inf
            keep = min(n, len(self.tokens) - 1)
            if keep <= 0:
                out.append(NeighborList(w, ()))
                continue
            if keep < len(d) - 1:
                # everything tied with the cut-off value must survive for the tie-break
                cut = np.partition(d, keep - 1)[keep - 1]
                cand = np.flatnonzero(d <= cut)
            else:
                cand = np.flatnonzero(np.isfinite(d))
            # vocabulary is sorted, so index order is lexicographic order
            order = cand[np.lexsort((cand, d[cand]))][:keep]
            out.append(NeighborList(w, tuple((self.tokens[i], float(d[i])) for i in order)))
        return out

    def query(self, w: str, n: int) -> NeighborList:
        return self.query_block([w], n)[0]


def top_n_neighbors(lex: VectorLexicon, eligible: Iterable[str], w: str, n: int) -> NeighborList:
    """The ``n`` eligible words closest to ``w`` by cosine distance (exact scan).

    Ties are broken lexicographically; ``w`` itself is excluded.
    """
    eligible = set(eligible)
    if w not in eligible:
        raise KeyError(f"word {w!r} is not eligible")
    return NeighborIndex(lex, eligible).query(w, n)
