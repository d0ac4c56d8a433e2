"""Joint CTC/cross-entropy objective for the character and Pinyin streams."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Callable, Sequence

import numpy as np
from scipy.special import log_softmax

DEFAULT_LAMBDA_CTC = 0.3
DEFAULT_ALPHA = 0.5


@dataclass(frozen=True)
class LossBreakdown:
    l_ctc_char: float
    l_ce_char: float
    l_ctc_py: float
    l_ce_py: float
    l_char: float
    l_py: float
    l_total: float
    lambda_ctc: float
    alpha: float

    def to_dict(self) -> dict:
        return asdict(self)


def cross_entropy(logits: np.ndarray, targets: Sequence[int]) -> tuple[float, np.ndarray]:
    """Mean over positions of ``-log softmax(logits)[target]``, with its gradient."""
    logits = np.asarray(logits, dtype=np.float64)
    if logits.ndim != 2:
        raise ValueError("logits must be L x V")
    L, V = logits.shape
    targets = np.asarray(targets, dtype=np.int64)
    if targets.shape != (L,):
        raise ValueError(f"got {targets.size} targets for {L} positions")
    if L == 0:
        raise ValueError("cross entropy over zero positions is undefined")
    if targets.min() < 0 or targets.max() >= V:
        raise ValueError("target id out of range")
    logp = log_softmax(logits, axis=1)
    rows = np.arange(L)
    loss = float(-logp[rows, targets].mean())
    grad = np.exp(logp)
    grad[rows, targets] -= 1.0
    return loss, grad / L


def combine(
    lambda_ctc: float,
    alpha: float,
    l_ctc_char: float,
    l_ce_char: float,
    l_ctc_py: float,
    l_ce_py: float,
) -> LossBreakdown:
    for name, w in (("lambda_ctc", lambda_ctc), ("alpha", alpha)):
        if not 0.0 <= w <= 1.0:
            raise ValueError(f"{name} must lie in [0, 1], got {w}")
    parts = (l_ctc_char, l_ce_char, l_ctc_py, l_ce_py)
    if not all(math.isfinite(x) for x in parts):
        raise ValueError(f"loss components must be finite, got {parts}")
    l_char = lambda_ctc * l_ctc_char + (1 - lambda_ctc) * l_ce_char
    l_py = lambda_ctc * l_ctc_py + (1 - lambda_ctc) * l_ce_py
    l_total = alpha * l_char + (1 - alpha) * l_py
    return LossBreakdown(
        l_ctc_char, l_ce_char, l_ctc_py, l_ce_py, l_char, l_py, l_total, lambda_ctc, alpha
    )


def finite_diff_check(
    loss_fn: Callable[[np.ndarray], tuple[float, np.ndarray]],
    point: np.ndarray,
    eps: float = 1e-5,
) -> float:
    """Max componentwise relative error between analytic and central-difference gradients.

    The denominator is ``max(|analytic|, |numeric|, 1e-8)``.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    point = np.array(point, dtype=np.float64)
    _, analytic = loss_fn(point)
    analytic = np.asarray(analytic, dtype=np.float64)
    numeric = np.zeros_like(point)
    flat = point.reshape(-1)
    num_flat = numeric.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + eps
        up, _ = loss_fn(point)
        flat[i] = orig - eps
        down, _ = loss_fn(point)
        flat[i] = orig
        if not (math.isfinite(up) and math.isfinite(down)):
            raise ValueError(f"non-finite loss when perturbing component {i}")
        num_flat[i] = (up - down) / (2 * eps)
    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), 1e-8)
    return float(np.max(np.abs(analytic - numeric) / denom))
