"""Corpus tokenization and word-substitution corruption at a target WER."""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from typing import Container, Iterable, Sequence

import numpy as np

from .substitution import SubstitutionTable, sample_substitute

_NONSPACE = re.compile(r"\S+")


@dataclass(frozen=True)
class Token:
    surface: str
    start: int
    prefix: str
    body: str  # core with original casing
    suffix: str
    eligible: bool = False

    @property
    def core(self) -> str:
        return self.body.lower()


@dataclass(frozen=True)
class TokenizedSentence:
    raw: str
    tokens: tuple[Token, ...]

    @property
    def cores(self) -> list[str]:
        return [t.core for t in self.tokens if t.core]

    def render(self, replacements: dict[int, str] | None = None) -> str:
        """Rebuild the line, swapping in new bodies for the given token indices."""
        if not replacements:
            return self.raw
        out, pos = [], 0
        for i, tok in enumerate(self.tokens):
            out.append(self.raw[pos:tok.start])
            if i in replacements:
                out.append(tok.prefix + replacements[i] + tok.suffix)
            else:
                out.append(tok.surface)
            pos = tok.start + len(tok.surface)
        out.append(self.raw[pos:])
        return "".join(out)


@dataclass(frozen=True)
class CorruptionRecord:
    sentence_index: int
    token_index: int
    original: str
    replacement: str
    probability: float


@dataclass
class CorruptionResult:
    lines: list[str]
    records: list[CorruptionRecord]
    n_eligible: int
    n_tokens: int
    wer: float
    seed: int
    sentences: list[TokenizedSentence] = field(repr=False, default_factory=list)

    @property
    def n_substituted(self) -> int:
        return len(self.records)

    @property
    def realized_wer_eligible(self) -> float:
        return self.n_substituted / self.n_eligible if self.n_eligible else 0.0

    @property
    def realized_wer_all(self) -> float:
        return self.n_substituted / self.n_tokens if self.n_tokens else 0.0

    def summary(self) -> dict:
        return {
            "wer": self.wer,
            "seed": self.seed,
            "tokens": self.n_tokens,
            "eligible": self.n_eligible,
            "substituted": self.n_substituted,
            "realized_wer_eligible": self.realized_wer_eligible,
            "realized_wer_all": self.realized_wer_all,
        }


def _peel(surface: str) -> tuple[str, str, str]:
    i, j = 0, len(surface)
    while i < j and not surface[i].isalnum():
        i += 1
    while j > i and not surface[j - 1].isalnum():
        j -= 1
    return surface[:i], surface[i:j], surface[j:]


def tokenize(line: str, vocabulary: Container[str] | None = None) -> TokenizedSentence:
    """Whitespace tokenization with punctuation peeled off each token.

    A token is eligible when its lowercased core is in ``vocabulary``
    (typically the substitution table).
    """
    line = line.rstrip("\r\n")
    toks = []
    for m in _NONSPACE.finditer(line):
        prefix, body, suffix = _peel(m.group())
        eligible = bool(body) and vocabulary is not None and body.lower() in vocabulary
        toks.append(Token(m.group(), m.start(), prefix, body, suffix, eligible))
    return TokenizedSentence(line, tuple(toks))


def _n_select(wer: float, n: int) -> int:
    # round half up, not banker's rounding
    return int(math.floor(wer * n + 0.5))


def _check_wer(wer: float) -> None:
    if not 0.0 <= wer <= 1.0:
        raise ValueError(f"wer must be in [0, 1], got {wer}")


def eligible_positions(corpus: Sequence[TokenizedSentence]) -> list[tuple[int, int]]:
    return [(s, t) for s, sent in enumerate(corpus)
            for t, tok in enumerate(sent.tokens) if tok.eligible]


@dataclass(frozen=True)
class _Plan:
    positions: list[tuple[int, int]]
    order: np.ndarray  # indices into positions, selection priority
    uniforms: np.ndarray  # one draw per eligible position
    groups: list[np.ndarray] | None  # per-sentence priority lists


def _plan(corpus: Sequence[TokenizedSentence], seed: int, per_sentence: bool) -> _Plan:
    """Fix every random quantity up front so that all WER levels share them."""
    positions = eligible_positions(corpus)
    rng = np.random.default_rng(seed)
    if per_sentence:
        groups, start = [], 0
        for sent in corpus:
            k = sum(t.eligible for t in sent.tokens)
            groups.append(start + rng.permutation(k))
            start += k
        order = np.concatenate(groups) if groups else np.zeros(0, dtype=int)
    else:
        groups = None
        order = rng.permutation(len(positions))
    uniforms = rng.random(len(positions))
    return _Plan(positions, order, uniforms, groups)


def _selected(plan: _Plan, wer: float) -> np.ndarray:
    if plan.groups is None:
        return plan.order[:_n_select(wer, len(plan.positions))]
    parts = [g[:_n_select(wer, len(g))] for g in plan.groups]
    return np.concatenate(parts) if parts else np.zeros(0, dtype=int)


def select_positions(corpus: Sequence[TokenizedSentence], wer: float, seed: int,
                     per_sentence: bool = False) -> set[tuple[int, int]]:
    """``round(wer * E)`` eligible positions, uniformly without replacement.

    Positions come from one seeded shuffle, so for a fixed seed the
    selection at a lower rate is contained in the selection at a higher one.
    """
    _check_wer(wer)
    plan = _plan(corpus, seed, per_sentence)
    return {plan.positions[i] for i in _selected(plan, wer)}


def match_case(original: str, replacement: str) -> str:
    if len(original) > 1 and original.isupper():
        return replacement.upper()
    if original[:1].isupper():
        return replacement[:1].upper() + replacement[1:]
    return replacement


def corrupt_corpus(lines: Iterable[str], table: SubstitutionTable, wer: float, seed: int,
                   per_sentence: bool = False) -> CorruptionResult:
    """Replace ``round(wer * E)`` eligible tokens by sampled substitutes.

    Every eligible position receives its own uniform draw from the seeded
    stream regardless of ``wer``, so runs at different rates with the same
    seed agree on every position they both corrupt.
    """
    _check_wer(wer)
    corpus = [tokenize(line, table.entries) for line in lines]
    plan = _plan(corpus, seed, per_sentence)
    chosen = sorted(_selected(plan, wer).tolist())  # document order
    replacements: dict[int, dict[int, str]] = {}
    records = []
    for i in chosen:
        s, t = plan.positions[i]
        tok = corpus[s].tokens[t]
        cs = table[tok.core]
        new = sample_substitute(cs, float(plan.uniforms[i]))
        prob = next(c.probability for c in cs.candidates if c.token == new)
        replacements.setdefault(s, {})[t] = match_case(tok.body, new)
        records.append(CorruptionRecord(s, t, tok.core, new, prob))
    out = [sent.render(replacements.get(s)) for s, sent in enumerate(corpus)]
    return CorruptionResult(
        lines=out, records=records, n_eligible=len(plan.positions),
        n_tokens=sum(len(s.tokens) for s in corpus), wer=wer, seed=seed, sentences=corpus)


def write_records(records: Iterable[CorruptionRecord], path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("sentence_index\ttoken_index\toriginal\treplacement\tprobability\n")
        for r in records:
            fh.write(f"{r.sentence_index}\t{r.token_index}\t{r.original}\t"
                     f"{r.replacement}\t{r.probability:.12g}\n")
