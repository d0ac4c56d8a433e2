"""Frame-level posterior matrices: the VPPM binary format and a fixture generator.

Layout (little-endian)::

    b"VPPM" | u8 version=1 | u8 flags (bit0: log domain) | u16 reserved=0
    | u32 frames | u32 vocab_size | frames*vocab_size f32, row-major

``-inf`` is stored as the most negative finite float32 and mapped back on read.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass
from typing import BinaryIO, Iterable, Sequence, TextIO

import numpy as np
from scipy.special import logsumexp

MAGIC = b"VPPM"
VERSION = 1
FLAG_LOG = 0x01
_HEADER = struct.Struct("<4sBBHII")
NEG_INF_SENTINEL = np.float32(np.finfo(np.float32).min)
NORM_TOL = 1e-4
BLANK = "<blank>"


class PosteriorFormatError(ValueError):
    pass


class BadMagicError(PosteriorFormatError):
    pass


class VersionMismatchError(PosteriorFormatError):
    pass


class TruncatedError(PosteriorFormatError):
    def __init__(self, expected: int, actual: int):
        self.expected = expected
        self.actual = actual
        super().__init__(f"truncated payload: expected {expected} bytes, got {actual}")


class NormalizationError(PosteriorFormatError):
    pass


@dataclass(frozen=True)
class PosteriorMatrix:
    """``frames x vocab_size`` natural-log probabilities (blank is id 0)."""

    values: np.ndarray

    def __post_init__(self) -> None:
        if self.values.ndim != 2:
            raise ValueError(f"posterior matrix must be 2-D, got shape {self.values.shape}")

    @property
    def frames(self) -> int:
        return self.values.shape[0]

    @property
    def vocab_size(self) -> int:
        return self.values.shape[1]

    @classmethod
    def from_probs(cls, probs, dtype=np.float64) -> "PosteriorMatrix":
        with np.errstate(divide="ignore"):
            m = cls(np.log(np.asarray(probs, dtype=np.float64)).astype(dtype))
        m.validate()
        return m

    def validate(self, tol: float = NORM_TOL) -> None:
        v = self.values
        if np.isnan(v).any() or np.isposinf(v).any():
            raise NormalizationError("posteriors contain NaN or +inf")
        with np.errstate(divide="ignore", invalid="ignore"):
            norms = logsumexp(v.astype(np.float64), axis=1)
        bad = np.flatnonzero(~(np.abs(norms) <= tol))
        if bad.size:
            t = int(bad[0])
            raise NormalizationError(
                f"row {t} not normalized: logsumexp = {norms[t]:.3g} (tolerance {tol})"
            )


def write_posteriors(m: PosteriorMatrix, sink: BinaryIO, log_domain: bool = True) -> int:
    """Serialize ``m`` (rounded to float32). Returns the number of bytes written."""
    m.validate()
    payload = m.values.astype(np.float32)
    if log_domain:
        payload = np.where(np.isneginf(payload), NEG_INF_SENTINEL, payload)
    else:
        payload = np.exp(payload.astype(np.float64)).astype(np.float32)
    header = _HEADER.pack(MAGIC, VERSION, FLAG_LOG if log_domain else 0, 0, m.frames, m.vocab_size)
    body = np.ascontiguousarray(payload, dtype="<f4").tobytes()
    sink.write(header)
    sink.write(body)
    return len(header) + len(body)


def read_posteriors(source: BinaryIO) -> PosteriorMatrix:
    head = source.read(_HEADER.size)
    if len(head) < 4 or head[:4] != MAGIC:
        raise BadMagicError(f"bad magic: {head[:4]!r}")
    if len(head) < _HEADER.size:
        raise TruncatedError(_HEADER.size, len(head))
    _, version, flags, _reserved, frames, vocab = _HEADER.unpack(head)
    if version != VERSION:
        raise VersionMismatchError(f"version mismatch: file has {version}, reader supports {VERSION}")
    expected = frames * vocab * 4
    body = source.read(expected)
    if len(body) != expected:
        raise TruncatedError(expected, len(body))
    values = np.frombuffer(body, dtype="<f4").reshape(frames, vocab).astype(np.float32)
    if flags & FLAG_LOG:
        values[values == NEG_INF_SENTINEL] = -np.inf
    else:
        with np.errstate(divide="ignore"):
            logs = np.log(values.astype(np.float64))
            values = (logs - logsumexp(logs, axis=1, keepdims=True)).astype(np.float32)
    m = PosteriorMatrix(values)
    m.validate()
    return m


def save_posteriors(m: PosteriorMatrix, path) -> int:
    with open(path, "wb") as fh:
        return write_posteriors(m, fh)


def load_posteriors(path) -> PosteriorMatrix:
    with open(path, "rb") as fh:
        return read_posteriors(fh)


@dataclass(frozen=True)
class StreamVocab:
    tokens: tuple[str, ...]
    blank_id: int = 0

    def __post_init__(self) -> None:
        if len(set(self.tokens)) != len(self.tokens):
            raise ValueError("stream vocabulary has duplicate tokens")
        if not self.tokens or self.tokens[self.blank_id] != BLANK:
            raise ValueError(f"token {self.blank_id} must be {BLANK!r}")
        object.__setattr__(self, "_ids", {t: i for i, t in enumerate(self.tokens)})

    def __len__(self) -> int:
        return len(self.tokens)

    def id(self, token: str) -> int:
        return self._ids[token]  # type: ignore[attr-defined]

    def encode(self, tokens: Iterable[str]) -> list[int]:
        return [self.id(t) for t in tokens]

    def decode(self, ids: Iterable[int]) -> list[str]:
        return [self.tokens[i] for i in ids]

    @classmethod
    def build(cls, tokens: Iterable[str]) -> "StreamVocab":
        return cls((BLANK, *tokens))

    @classmethod
    def load(cls, source: TextIO) -> "StreamVocab":
        return cls(tuple(line.rstrip("\n") for line in source if line.rstrip("\n")))

    def dump(self, sink: TextIO) -> None:
        for t in self.tokens:
            sink.write(t + "\n")


def _alignment(target: Sequence[int], frames_per_token: int, blank_gap: int) -> list[int]:
    path: list[int] = [0] * blank_gap
    prev = None
    for tok in target:
        if tok == prev and blank_gap == 0:
            path.append(0)  # repeats need a separating blank to survive collapse
        path.extend([tok] * frames_per_token)
        path.extend([0] * blank_gap)
        prev = tok
    return path or [0]


def synth_posteriors(
    target: Sequence[int],
    vocab_size: int,
    frames_per_token: int = 2,
    blank_gap: int = 1,
    noise: float = 0.0,
    seed: int = 0,
) -> PosteriorMatrix:
    """Posteriors whose per-frame argmax path collapses to ``target`` at ``noise=0``.

    With ``noise > 0`` each frame's label is replaced by a uniformly random one
    with probability ``noise``, and the row becomes
    ``(1 - noise) * onehot + noise * Dirichlet(1)``. Values are float32.
    """
    if frames_per_token < 1:
        raise ValueError("frames_per_token must be >= 1")
    if not 0.0 <= noise <= 1.0:
        raise ValueError("noise must lie in [0, 1]")
    for tok in target:
        if not 0 < tok < vocab_size:
            raise ValueError(f"target id {tok} outside non-blank range [1, {vocab_size})")
    rng = np.random.default_rng(seed)
    path = np.asarray(_alignment(target, frames_per_token, blank_gap))
    T = len(path)
    if noise > 0:
        flip = rng.random(T) < noise
        path = np.where(flip, rng.integers(0, vocab_size, size=T), path)
        probs = noise * rng.dirichlet(np.ones(vocab_size), size=T)
        probs[np.arange(T), path] += 1.0 - noise
    else:
        probs = np.zeros((T, vocab_size))
        probs[np.arange(T), path] = 1.0
    with np.errstate(divide="ignore"):
        logp = np.log(probs)
    logp -= logsumexp(logp, axis=1, keepdims=True)
    return PosteriorMatrix(logp.astype(np.float32))
