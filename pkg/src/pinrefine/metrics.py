"""Character error rate with substitution/deletion/insertion accounting."""
from __future__ import annotations

import unicodedata
from dataclasses import dataclass, field
from typing import Iterable, Sequence


@dataclass(frozen=True)
class EditCounts:
    S: int
    D: int
    I: int
    N: int

    @property
    def errors(self) -> int:
        return self.S + self.D + self.I

    @property
    def hyp_len(self) -> int:
        return self.N - self.D + self.I

    @property
    def reference_undefined(self) -> bool:
        """True when the reference is empty but the hypothesis is not."""
        return self.N == 0 and self.I > 0

    def __add__(self, other: "EditCounts") -> "EditCounts":
        return EditCounts(self.S + other.S, self.D + other.D, self.I + other.I, self.N + other.N)


def _chars(s: str | Sequence[str]) -> list[str]:
    if isinstance(s, str):
        return list(unicodedata.normalize("NFC", s))
    return list(s)


def edit_counts(ref: str | Sequence[str], hyp: str | Sequence[str]) -> EditCounts:
    """Unit-cost Levenshtein alignment of ``hyp`` against ``ref``.

    Among equally cheap alignments the backtrace takes the diagonal
    (match/substitution) first, then deletion, then insertion.
    """
    r, h = _chars(ref), _chars(hyp)
    n, m = len(r), len(h)
    dist = [[0] * (m + 1) for _ in range(n + 1)]
    for i in range(n + 1):
        dist[i][0] = i
    for j in range(m + 1):
        dist[0][j] = j
    for i in range(1, n + 1):
        ri = r[i - 1]
        row, up = dist[i], dist[i - 1]
        for j in range(1, m + 1):
            row[j] = min(
                up[j - 1] + (ri != h[j - 1]),
                up[j] + 1,
                row[j - 1] + 1,
            )
    S = D = I = 0
    i, j = n, m
    while i or j:
        if i and j and dist[i][j] == dist[i - 1][j - 1] + (r[i - 1] != h[j - 1]):
            S += r[i - 1] != h[j - 1]
            i, j = i - 1, j - 1
        elif i and dist[i][j] == dist[i - 1][j] + 1:
            D += 1
            i -= 1
        else:
            I += 1
            j -= 1
    return EditCounts(S, D, I, n)


def cer(c: EditCounts) -> float:
    """``(S + D + I) / N``.

    An empty reference gives 0 when the hypothesis is also empty; otherwise
    ``I / 1`` is returned and ``c.reference_undefined`` is set.
    """
    if c.N == 0:
        if c.S or c.D:
            raise ValueError("empty reference cannot have substitutions or deletions")
        return float(c.I)
    return c.errors / c.N


@dataclass(frozen=True)
class CorpusReport:
    counts: EditCounts
    cer: float
    per_utterance: list[EditCounts] = field(default_factory=list)

    @property
    def undefined_references(self) -> int:
        return sum(c.reference_undefined for c in self.per_utterance)

    def to_dict(self) -> dict:
        c = self.counts
        return {
            "S": c.S,
            "D": c.D,
            "I": c.I,
            "N": c.N,
            "cer": self.cer,
            "utterances": len(self.per_utterance),
            "undefined_references": self.undefined_references,
        }


def corpus_cer(pairs: Iterable[tuple[str, str]]) -> CorpusReport:
    """Pooled (micro-averaged) CER: total edits over total reference length."""
    per = [edit_counts(ref, hyp) for ref, hyp in pairs]
    total = sum(per, EditCounts(0, 0, 0, 0))
    return CorpusReport(total, cer(total), per)
