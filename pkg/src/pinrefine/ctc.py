"""CTC collapse, forward-backward loss, greedy and prefix beam decoding.

Everything works on natural-log posteriors with blank at id 0 unless told
otherwise. Scores are raw log masses; no length normalization is applied.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .posteriors import PosteriorMatrix

NEG_INF = -math.inf


class InfeasibleTargetError(ValueError):
    """Target cannot be emitted in the available number of frames."""


@dataclass(frozen=True, order=False)
class Hypothesis:
    tokens: tuple[int, ...]
    log_score: float


# sorted by log_score descending, pairwise distinct token sequences
NBestList = list[Hypothesis]


def _as_logprobs(p: PosteriorMatrix | np.ndarray) -> np.ndarray:
    values = p.values if isinstance(p, PosteriorMatrix) else p
    return np.asarray(values, dtype=np.float64)


def collapse(alignment: Sequence[int], blank: int = 0) -> list[int]:
    """Merge adjacent repeats, then drop blanks."""
    out: list[int] = []
    prev = None
    for a in alignment:
        if a != prev and a != blank:
            out.append(a)
        prev = a
    return out


def min_frames(target: Sequence[int]) -> int:
    repeats = sum(1 for a, b in zip(target, target[1:]) if a == b)
    return len(target) + repeats


def _shift(x: np.ndarray, k: int) -> np.ndarray:
    """``out[s] = x[s - k]``, -inf where the source index falls outside."""
    out = np.full_like(x, NEG_INF)
    if k > 0 and k < len(x):
        out[k:] = x[:-k]
    elif k < 0 and -k < len(x):
        out[:k] = x[-k:]
    return out


def _lse(*xs: np.ndarray) -> np.ndarray:
    out = xs[0]
    for x in xs[1:]:
        out = np.logaddexp(out, x)
    return out


def ctc_loss(
    p: PosteriorMatrix | np.ndarray, target: Sequence[int], blank: int = 0
) -> tuple[float, np.ndarray]:
    """Negative log-likelihood of ``target`` and its gradient w.r.t. the log-probs.

    The log-probs are treated as free inputs (no softmax Jacobian), so the
    gradient entry for ``(t, v)`` is minus the posterior occupancy of symbol
    ``v`` at frame ``t``. Returns ``(inf, zeros)`` when the target is feasible
    in length but has zero probability.
    """
    lp = _as_logprobs(p)
    T, V = lp.shape
    target = list(target)
    if any(tok == blank for tok in target):
        raise ValueError("target must not contain the blank id")
    if any(not 0 <= tok < V for tok in target):
        raise ValueError("target id outside vocabulary")
    need = min_frames(target)
    if T < need:
        raise InfeasibleTargetError(
            f"target of length {len(target)} needs at least {need} frames, got {T}"
        )

    ext = np.full(2 * len(target) + 1, blank, dtype=np.int64)
    ext[1::2] = target
    S = len(ext)
    # skip[s]: transition s-2 -> s allowed
    skip = np.zeros(S, dtype=bool)
    skip[2:] = (ext[2:] != blank) & (ext[2:] != ext[:-2])
    emit = lp[:, ext]  # T x S

    alpha = np.full((T, S), NEG_INF)
    alpha[0, 0] = emit[0, 0]
    if S > 1:
        alpha[0, 1] = emit[0, 1]
    neg = np.full(S, NEG_INF)
    with np.errstate(invalid="ignore"):
        for t in range(1, T):
            prev = alpha[t - 1]
            shift1 = _shift(prev, 1)
            shift2 = np.where(skip, _shift(prev, 2), neg)
            alpha[t] = _lse(prev, shift1, shift2) + emit[t]

        # beta[t, s]: log mass of completing from state s at t, excluding emit[t, s]
        beta = np.full((T, S), NEG_INF)
        beta[T - 1, S - 1] = 0.0
        if S > 1:
            beta[T - 1, S - 2] = 0.0
        skip_from = np.zeros(S, dtype=bool)  # s -> s+2 allowed
        skip_from[: max(S - 2, 0)] = skip[2:]
        for t in range(T - 2, -1, -1):
            nxt = beta[t + 1] + emit[t + 1]
            shift1 = _shift(nxt, -1)
            shift2 = np.where(skip_from, _shift(nxt, -2), neg)
            beta[t] = _lse(nxt, shift1, shift2)

    log_z = float(np.logaddexp(alpha[T - 1, S - 1], alpha[T - 1, S - 2] if S > 1 else NEG_INF))
    grad = np.zeros((T, V))
    if log_z == NEG_INF:
        return math.inf, grad
    occupancy = np.exp(alpha + beta - log_z)
    for s in range(S):
        grad[:, ext[s]] -= occupancy[:, s]
    return -log_z, grad


def greedy_decode(p: PosteriorMatrix | np.ndarray, blank: int = 0) -> Hypothesis:
    lp = _as_logprobs(p)
    path = np.argmax(lp, axis=1)  # first maximum, i.e. lowest id on ties
    score = float(lp[np.arange(lp.shape[0]), path].sum())
    return Hypothesis(tuple(collapse(path.tolist(), blank)), score)


def _logadd(a: float, b: float) -> float:
    if a == NEG_INF:
        return b
    if b == NEG_INF:
        return a
    if a < b:
        a, b = b, a
    return a + math.log1p(math.exp(b - a))


def _rank_key(item: tuple[tuple[int, ...], float]) -> tuple:
    prefix, score = item
    return (-score, len(prefix), prefix)


def prefix_beam_search(
    p: PosteriorMatrix | np.ndarray,
    beam_width: int = 16,
    k: int = 5,
    blank: int = 0,
    top_n: int | None = None,
) -> NBestList:
    """CTC prefix beam search returning up to ``k`` distinct collapsed sequences.

    Each prefix keeps separate log masses for alignments ending in blank and
    in its last label. Pruning and the final ranking sort by total mass, then
    shorter sequence, then token ids, so ties resolve identically everywhere.
    ``top_n`` optionally restricts each frame to its ``top_n`` best labels.
    """
    if not beam_width >= k >= 1:
        raise ValueError(f"need beam_width >= k >= 1, got beam_width={beam_width}, k={k}")
    lp = _as_logprobs(p)
    T, V = lp.shape
    beams: dict[tuple[int, ...], tuple[float, float]] = {(): (0.0, NEG_INF)}

    for t in range(T):
        row = lp[t]
        labels = np.flatnonzero(row > NEG_INF)
        if top_n is not None and labels.size > top_n:
            labels = labels[np.argsort(-row[labels], kind="stable")[:top_n]]
        labels = [int(c) for c in labels if c != blank]
        p_blank = float(row[blank])
        nxt: dict[tuple[int, ...], list[float]] = {}

        def entry(prefix: tuple[int, ...]) -> list[float]:
            e = nxt.get(prefix)
            if e is None:
                e = nxt[prefix] = [NEG_INF, NEG_INF]
            return e

        for prefix, (pb, pnb) in beams.items():
            total = _logadd(pb, pnb)
            if p_blank > NEG_INF:
                e = entry(prefix)
                e[0] = _logadd(e[0], total + p_blank)
            last = prefix[-1] if prefix else None
            for c in labels:
                pc = float(row[c])
                ext = prefix + (c,)
                if c == last:
                    e = entry(prefix)
                    e[1] = _logadd(e[1], pnb + pc)
                    e = entry(ext)
                    e[1] = _logadd(e[1], pb + pc)
                else:
                    e = entry(ext)
                    e[1] = _logadd(e[1], total + pc)

        scored = [
            (prefix, _logadd(pb, pnb)) for prefix, (pb, pnb) in nxt.items()
        ]
        scored = [item for item in scored if item[1] > NEG_INF]
        scored.sort(key=_rank_key)
        beams = {prefix: tuple(nxt[prefix]) for prefix, _ in scored[:beam_width]}

    final = sorted(((prefix, _logadd(pb, pnb)) for prefix, (pb, pnb) in beams.items()), key=_rank_key)
    return [Hypothesis(prefix, min(score, 0.0)) for prefix, score in final[:k] if score > NEG_INF]
