"""Feature-weighted phonological edit distance between ARPABET transcriptions.

Substituting one phoneme for another costs the number of articulation
features on which they disagree.  Inserting or deleting a phoneme costs, by
default, the number of features it specifies, i.e. a substitution against a
fully unspecified null phoneme.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .resources import FeatureTable, PronouncingLexicon


class ZeroPolicy(str, enum.Enum):
    ZERO_COUNTS_AS_DIFFERENCE = "zero_counts_as_difference"
    ZERO_MATCHES_ANYTHING = "zero_matches_anything"


class UnknownPhonemeError(KeyError):
    pass


@dataclass(frozen=True)
class PhonemeCostModel:
    """Per-edit costs derived from a FeatureTable.

    ``indel_cost=None`` prices an insertion or deletion by the number of
    specified (non-zero) features of the phoneme; a number makes it constant.
    """

    table: FeatureTable
    indel_cost: float | None = None
    zero_policy: ZeroPolicy = ZeroPolicy.ZERO_COUNTS_AS_DIFFERENCE
    _index: dict = field(init=False, repr=False, compare=False)
    _sub: np.ndarray = field(init=False, repr=False, compare=False)
    _indel: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        zp = ZeroPolicy(self.zero_policy)
        object.__setattr__(self, "zero_policy", zp)
        if self.indel_cost is not None and self.indel_cost < 0:
            raise ValueError("indel cost must be non-negative")
        symbols = self.table.phonemes
        rows = np.array([self.table[s] for s in symbols], dtype=np.int8)
        diff = rows[:, None, :] != rows[None, :, :]
        if zp is ZeroPolicy.ZERO_MATCHES_ANYTHING:
            diff &= (rows[:, None, :] != 0) & (rows[None, :, :] != 0)
        sub = diff.sum(axis=2).astype(np.float64)
        if self.indel_cost is None:
            indel = (rows != 0).sum(axis=1).astype(np.float64)
        else:
            indel = np.full(len(symbols), float(self.indel_cost))
        sub.flags.writeable = False
        indel.flags.writeable = False
        object.__setattr__(self, "_index", {s: i for i, s in enumerate(symbols)})
        object.__setattr__(self, "_sub", sub)
        object.__setattr__(self, "_indel", indel)

    @property
    def indel_policy(self) -> str:
        if self.indel_cost is None:
            return "specified_feature_count"
        return f"constant({self.indel_cost:g})"

    def encode(self, seq: Sequence[str]) -> np.ndarray:
        try:
            return np.fromiter((self._index[p] for p in seq), dtype=np.intp, count=len(seq))
        except KeyError as exc:
            raise UnknownPhonemeError(f"unknown phoneme {exc.args[0]!r}") from None

    def sub_cost(self, p: str, q: str) -> float:
        i, j = self.encode((p, q))
        return float(self._sub[i, j])

    def indel(self, p: str) -> float:
        return float(self._indel[self.encode((p,))[0]])


def phoneme_sub_cost(model: PhonemeCostModel, p: str, q: str) -> float:
    return model.sub_cost(p, q)


def _dp_matrix(model: PhonemeCostModel, a: Sequence[str], b: Sequence[str]) -> np.ndarray:
    ia, ib = model.encode(a), model.encode(b)
    sub, indel = model._sub, model._indel
    n, m = len(ia), len(ib)
    d = np.zeros((n + 1, m + 1))
    d[1:, 0] = np.cumsum(indel[ia])
    d[0, 1:] = np.cumsum(indel[ib])
    for i in range(1, n + 1):
        pa = ia[i - 1]
        del_cost = indel[pa]
        for j in range(1, m + 1):
            pb = ib[j - 1]
            d[i, j] = min(d[i - 1, j] + del_cost,
                          d[i, j - 1] + indel[pb],
                          d[i - 1, j - 1] + sub[pa, pb])
    return d


def phono_edit_distance(model: PhonemeCostModel, a: Sequence[str], b: Sequence[str]) -> float:
    """Minimal total cost of turning phoneme sequence ``a`` into ``b``."""
    if not a or not b:
        raise ValueError("phoneme sequences must be non-empty")
    return float(_dp_matrix(model, a, b)[-1, -1])


def format_dp_matrix(model: PhonemeCostModel, a: Sequence[str], b: Sequence[str]) -> str:
    """Render the dynamic-programming table for inspection."""
    d = _dp_matrix(model, a, b)
    cols = ["", "#", *b]
    width = max(5, *(len(c) for c in cols)) + 1
    out = ["".join(c.rjust(width) for c in cols)]
    for i, label in enumerate(["#", *a]):
        out.append(label.rjust(width) + "".join(f"{v:g}".rjust(width) for v in d[i]))
    return "\n".join(out)


def word_phono_distance(model: PhonemeCostModel, lex: PronouncingLexicon, w1: str, w2: str) -> float:
    """Minimum edit distance over all pronunciation pairs of two words."""
    for w in (w1, w2):
        if w not in lex:
            raise KeyError(f"word {w!r} not in pronouncing lexicon")
    return min(phono_edit_distance(model, a, b) for a in lex[w1] for b in lex[w2])


def batch_edit_distances(model: PhonemeCostModel, a: Sequence[str],
                         others: Sequence[Sequence[str]]) -> np.ndarray:
    """Distances from ``a`` to each sequence in ``others``.

    Runs the same recurrence as :func:`phono_edit_distance`, vectorized over
    the candidates (padded to a common length).
    """
    k = len(others)
    if k == 0:
        return np.zeros(0)
    ia = model.encode(a)
    lengths = np.fromiter((len(o) for o in others), dtype=np.intp, count=k)
    if not len(ia) or lengths.min() == 0:
        raise ValueError("phoneme sequences must be non-empty")
    width = int(lengths.max())
    codes = np.zeros((k, width), dtype=np.intp)
    for r, seq in enumerate(others):
        codes[r, : len(seq)] = model.encode(seq)
    sub, indel = model._sub, model._indel
    ins = indel[codes]  # (k, width); padding cells are never read at their length
    prev = np.zeros((k, width + 1))
    prev[:, 1:] = np.cumsum(ins, axis=1)
    cur = np.empty_like(prev)
    for pa in ia:
        del_cost = indel[pa]
        cur[:, 0] = prev[:, 0] + del_cost
        diag = prev[:, :-1] + sub[pa][codes]
        up = prev[:, 1:] + del_cost
        best = np.minimum(diag, up)
        for j in range(width):
            cur[:, j + 1] = np.minimum(best[:, j], cur[:, j] + ins[:, j])
        prev, cur = cur, prev
    return prev[np.arange(k), lengths]


def batch_word_distances(model: PhonemeCostModel, lex: PronouncingLexicon, w: str,
                         others: Sequence[str]) -> np.ndarray:
    """:func:`word_phono_distance` from ``w`` to each word in ``others``."""
    if not others:
        return np.zeros(0)
    flat: list[Sequence[str]] = []
    owner: list[int] = []
    for i, o in enumerate(others):
        for pron in lex[o]:
            flat.append(pron)
            owner.append(i)
    owner_arr = np.asarray(owner)
    best = np.full(len(flat), np.inf)
    for pron in lex[w]:
        best = np.minimum(best, batch_edit_distances(model, pron, flat))
    out = np.full(len(others), np.inf)
    np.minimum.at(out, owner_arr, best)
    return out
