"""Character language scorers used to rank lattice paths."""
from __future__ import annotations

import json
import math
from collections import Counter, defaultdict
from pathlib import Path
from typing import Iterable, Protocol, runtime_checkable

BOS = "<s>"
END = "</s>"
UNK = "<unk>"


@runtime_checkable
class Scorer(Protocol):
    """Autoregressive character scorer.

    ``score(prefix, next)`` is ``log P(next | prefix)`` with ``next`` a single
    character or :data:`END`; every value is <= 0.
    """

    def score(self, prefix: str, next: str) -> float: ...

    def score_sequence(self, text: str) -> float: ...


class BaseScorer:
    def score(self, prefix: str, next: str) -> float:  # pragma: no cover - abstract
        raise NotImplementedError

    def score_sequence(self, text: str) -> float:
        total = sum(self.score(text[:i], ch) for i, ch in enumerate(text))
        return total + self.score(text, END)


class UniformScorer(BaseScorer):
    """Same log-probability for every step."""

    def __init__(self, vocab_size: int = 1):
        self.logp = -math.log(vocab_size + 1)

    def score(self, prefix: str, next: str) -> float:
        return self.logp


class NGramScorer(BaseScorer):
    """Add-k smoothed character n-gram model with begin/end markers.

    Characters never seen in training map to :data:`UNK`, which is part of the
    vocabulary with zero counts, so every context's distribution over
    ``vocab + {END}`` sums to one. An unseen context is uniform over that set.
    """

    def __init__(self, order: int, k: float, vocab: Iterable[str], counts: dict[tuple[str, ...], Counter]):
        if not 1 <= order <= 5:
            raise ValueError(f"order must be in [1, 5], got {order}")
        if not k > 0:
            raise ValueError(f"add-k constant must be positive, got {k}")
        self.order = order
        self.k = k
        self.vocab = tuple(sorted(set(vocab) | {UNK}))
        self._vocab_set = frozenset(self.vocab)
        self.counts = counts
        self.totals = {ctx: sum(c.values()) for ctx, c in counts.items()}
        self._denom_k = k * (len(self.vocab) + 1)

    def _context(self, prefix: str) -> tuple[str, ...]:
        n = self.order - 1
        if n == 0:
            return ()
        tail = [c if c in self._vocab_set else UNK for c in prefix[-n:]]
        return tuple([BOS] * (n - len(tail)) + tail)

    def score(self, prefix: str, next: str) -> float:
        if next != END and next not in self._vocab_set:
            next = UNK
        ctx = self._context(prefix)
        c = self.counts.get(ctx)
        num = (c[next] if c else 0) + self.k
        den = self.totals.get(ctx, 0) + self._denom_k
        return math.log(num / den)

    def to_dict(self) -> dict:
        rows = [
            ["\u0001".join(ctx), nxt, n]
            for ctx in sorted(self.counts)
            for nxt, n in sorted(self.counts[ctx].items())
        ]
        return {"type": "ngram", "order": self.order, "k": self.k, "vocab": list(self.vocab), "counts": rows}

    @classmethod
    def from_dict(cls, d: dict) -> "NGramScorer":
        counts: dict[tuple[str, ...], Counter] = defaultdict(Counter)
        for ctx, nxt, n in d["counts"]:
            counts[tuple(ctx.split("\u0001")) if ctx else ()][nxt] = n
        return cls(d["order"], d["k"], d["vocab"], dict(counts))

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), ensure_ascii=False), encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "NGramScorer":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def train_ngram(corpus: Iterable[str], order: int = 3, k: float = 0.1) -> NGramScorer:
    lines = [line.strip() for line in corpus]
    lines = [line for line in lines if line]
    if not lines:
        raise ValueError("cannot train on an empty corpus")
    if not 1 <= order <= 5:
        raise ValueError(f"order must be in [1, 5], got {order}")
    counts: dict[tuple[str, ...], Counter] = defaultdict(Counter)
    pad = [BOS] * (order - 1)
    for line in lines:
        toks = pad + list(line) + [END]
        for i in range(order - 1, len(toks)):
            counts[tuple(toks[i - order + 1 : i])][toks[i]] += 1
    vocab = {ch for line in lines for ch in line}
    return NGramScorer(order, k, vocab, dict(counts))
