"""Fuse a predicted Pinyin sequence with a character N-best list and pick a path.

The lattice has one position per slot of the top-1 hypothesis aligned to the
Pinyin: syllable-anchored slots (matched, substituted or deleted characters)
and unanchored slots (characters with no syllable). Every hypothesis is
aligned to the same Pinyin and votes for a character, or for nothing, at each
slot; anchored slots are also expanded with frequent homophones.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

from ..inventory import PinyinSequence
from ..records import ScoredText
from .dictionary import HomophoneDictionary
from .ngram import END, Scorer

EPSILON = ""
DEFAULT_FLOOR = math.log(0.01)
DEFAULT_EXPANSION_CAP = 8

MATCH, SUBSTITUTE, INSERT, DELETE = "match", "substitute", "insert", "delete"


class RefinementError(RuntimeError):
    pass


@dataclass(frozen=True)
class AlignedPair:
    syllable: int | None  # index into the pinyin sequence
    char: int | None  # index into the hypothesis text
    op: str


@dataclass(frozen=True)
class Alignment:
    pairs: list[AlignedPair]
    cost: float


def _lev(a: str, b: str) -> int:
    prev = list(range(len(b) + 1))
    for i, ca in enumerate(a, start=1):
        cur = [i]
        for j, cb in enumerate(b, start=1):
            cur.append(min(prev[j - 1] + (ca != cb), prev[j] + 1, cur[j - 1] + 1))
        prev = cur
    return prev[-1]


def match_cost(syllable: int, char: str, dictionary: HomophoneDictionary) -> float:
    """0 for a homophone match, else the closest reading's normalized edit distance."""
    readings = dictionary.readings(char)
    if syllable in readings:
        return 0.0
    if not readings:
        return 1.0
    syl = dictionary.inventory.syllables[syllable]
    best = 1.0
    for r in readings:
        other = dictionary.inventory.syllables[r]
        best = min(best, _lev(syl, other) / max(len(syl), len(other)))
    return best


def _units(pinyin: PinyinSequence | Sequence[int]) -> list[int]:
    return list(pinyin.units) if isinstance(pinyin, PinyinSequence) else list(pinyin)


def align(
    pinyin_pred: PinyinSequence | Sequence[int], hyp: str, dictionary: HomophoneDictionary
) -> Alignment:
    """Minimum-cost alignment of syllables to characters.

    Insertions (a character with no syllable) and deletions (a syllable with
    no character) cost 1. Ties prefer the diagonal, then deletion.
    """
    syl = _units(pinyin_pred)
    n, m = len(syl), len(hyp)
    sub = [[match_cost(s, c, dictionary) for c in hyp] for s in syl]
    dist = [[0.0] * (m + 1) for _ in range(n + 1)]
    for i in range(1, n + 1):
        dist[i][0] = float(i)
    for j in range(1, m + 1):
        dist[0][j] = float(j)
    for i in range(1, n + 1):
        for j in range(1, m + 1):
            dist[i][j] = min(
                dist[i - 1][j - 1] + sub[i - 1][j - 1],
                dist[i - 1][j] + 1.0,
                dist[i][j - 1] + 1.0,
            )
    pairs: list[AlignedPair] = []
    i, j = n, m
    while i or j:
        if i and j and dist[i][j] == dist[i - 1][j - 1] + sub[i - 1][j - 1]:
            op = MATCH if sub[i - 1][j - 1] == 0.0 else SUBSTITUTE
            pairs.append(AlignedPair(i - 1, j - 1, op))
            i, j = i - 1, j - 1
        elif i and dist[i][j] == dist[i - 1][j] + 1.0:
            pairs.append(AlignedPair(i - 1, None, DELETE))
            i -= 1
        else:
            pairs.append(AlignedPair(None, j - 1, INSERT))
            j -= 1
    pairs.reverse()
    return Alignment(pairs, dist[n][m])


@dataclass(frozen=True)
class Candidate:
    char: str  # EPSILON for "emit nothing"
    weight: float  # local log-weight
    matches_anchor: bool
    from_nbest: bool = False
    from_pinyin_expansion: bool = False


@dataclass(frozen=True)
class Position:
    candidates: tuple[Candidate, ...]
    anchor: int | None = None  # syllable id

    def __post_init__(self) -> None:
        if not self.candidates:
            raise ValueError("lattice position without candidates")
        chars = [c.char for c in self.candidates]
        if len(set(chars)) != len(chars):
            raise ValueError(f"duplicate candidates {chars}")

    def get(self, char: str) -> Candidate | None:
        for c in self.candidates:
            if c.char == char:
                return c
        return None


@dataclass(frozen=True)
class RefinementLattice:
    positions: tuple[Position, ...]

    @property
    def path_count(self) -> int:
        return math.prod(len(p.candidates) for p in self.positions)


def _logsumexp(xs: Sequence[float]) -> float:
    m = max(xs)
    if m == -math.inf:
        return m
    return m + math.log(sum(math.exp(x - m) for x in xs))


def _slot_votes(pinyin: list[int], hyp: str, dictionary: HomophoneDictionary):
    """Per-syllable character (or EPSILON) and, per gap, inserted characters."""
    at_syllable = [EPSILON] * len(pinyin)
    gaps: dict[int, list[str]] = {}
    consumed = 0
    for pair in align(pinyin, hyp, dictionary).pairs:
        if pair.syllable is not None:
            if pair.char is not None:
                at_syllable[pair.syllable] = hyp[pair.char]
            consumed = pair.syllable + 1
        else:
            gaps.setdefault(consumed, []).append(hyp[pair.char])
    return at_syllable, gaps


def build_lattice(
    pinyin_pred: PinyinSequence | Sequence[int],
    nbest: Sequence[ScoredText],
    dictionary: HomophoneDictionary,
    expansion_cap: int = DEFAULT_EXPANSION_CAP,
    floor_weight: float = DEFAULT_FLOOR,
    pooling: str = "logsum",
    scale_expansions: bool = True,
) -> RefinementLattice:
    """Positional candidate lattice from the Pinyin and all N-best hypotheses.

    Hypothesis scores are first normalized to log-posteriors over the list, so
    a character's weight is the log of the posterior mass voting for it
    (``pooling="logsum"``) or of its single best voter (``pooling="max"``).
    Homophone expansions not proposed by any hypothesis get ``floor_weight``.

    With ``scale_expansions`` the floor shrinks by ``residual / covered`` once
    the N-best covers more than half of the decoder's probability mass, and
    expansions become unusable when the list covers all of it: a decoder that
    is certain leaves nothing for unseen homophones.
    """
    if not nbest:
        raise ValueError("cannot build a lattice from an empty N-best list")
    if pooling not in ("logsum", "max"):
        raise ValueError(f"unknown pooling {pooling!r}")
    pinyin = _units(pinyin_pred)
    norm = _logsumexp([h.log_score for h in nbest])
    posts = [h.log_score - norm for h in nbest]
    expansion_weight = floor_weight
    if scale_expansions:
        covered = min(math.exp(norm), 1.0)
        residual = 1.0 - covered
        ratio = residual / covered if covered > 0 else math.inf
        expansion_weight = floor_weight + min(0.0, math.log(ratio)) if ratio > 0 else -math.inf

    # skeleton from the top-1 hypothesis: (anchor index | None, gap, rank in gap)
    skeleton: list[tuple[int | None, int, int]] = []
    consumed = 0
    gap_rank: dict[int, int] = {}
    for pair in align(pinyin, nbest[0].text, dictionary).pairs:
        if pair.syllable is not None:
            skeleton.append((pair.syllable, -1, -1))
            consumed = pair.syllable + 1
        else:
            r = gap_rank.get(consumed, 0)
            gap_rank[consumed] = r + 1
            skeleton.append((None, consumed, r))

    votes: list[dict[str, list[float]]] = [{} for _ in skeleton]
    for hyp, post in zip(nbest, posts):
        at_syllable, gaps = _slot_votes(pinyin, hyp.text, dictionary)
        for slot, (syl_idx, gap, rank) in enumerate(skeleton):
            if syl_idx is not None:
                ch = at_syllable[syl_idx]
            else:
                inserted = gaps.get(gap, [])
                ch = inserted[rank] if rank < len(inserted) else EPSILON
            votes[slot].setdefault(ch, []).append(post)

    pool = _logsumexp if pooling == "logsum" else max
    positions = []
    for slot, (syl_idx, _, _) in enumerate(skeleton):
        anchor = pinyin[syl_idx] if syl_idx is not None else None
        weights = {ch: pool(ws) for ch, ws in votes[slot].items()}
        expansions: tuple[str, ...] = ()
        if anchor is not None and expansion_cap > 0:
            expansions = dictionary.homophones(anchor, expansion_cap)
        cands = []
        for ch in sorted(set(weights) | set(expansions)):
            if anchor is None:
                ok = ch == EPSILON
            else:
                ok = ch != EPSILON and dictionary.matches(ch, anchor)
            cands.append(
                Candidate(
                    char=ch,
                    weight=max(weights.get(ch, -math.inf), expansion_weight if ch in expansions else -math.inf),
                    matches_anchor=ok,
                    from_nbest=ch in weights,
                    from_pinyin_expansion=ch in expansions,
                )
            )
        positions.append(Position(tuple(cands), anchor))
    return RefinementLattice(tuple(positions))


@dataclass(frozen=True)
class RefineWeights:
    w_lm: float = 1.0
    w_ac: float = 0.5
    w_py: float = 1.0

    def __post_init__(self) -> None:
        for name in ("w_lm", "w_ac", "w_py"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")


@dataclass(frozen=True)
class RefineResult:
    text: str
    log_score: float
    path: tuple[str, ...] = field(default=(), compare=False)


def _step_score(candidate: Candidate, lm: float, w: RefineWeights) -> float:
    py = 0.0 if candidate.matches_anchor else -1.0
    return w.w_lm * lm + w.w_ac * candidate.weight + w.w_py * py


def refine(
    lattice: RefinementLattice,
    scorer: Scorer,
    weights: RefineWeights = RefineWeights(),
    beam: int = 16,
) -> RefineResult:
    """Best lattice path under ``w_lm*LM + w_ac*weight + w_py*anchor_penalty``.

    Partial paths that spell the same text are merged (their futures score
    identically), so with ``beam`` at least the path count the search is exact.
    Equal scores resolve to the lexicographically smallest text.
    """
    if beam < 1:
        raise ValueError("beam must be >= 1")
    # text -> (score, path)
    states: dict[str, tuple[float, tuple[str, ...]]] = {"": (0.0, ())}
    for i, pos in enumerate(lattice.positions):
        nxt: dict[str, tuple[float, tuple[str, ...]]] = {}
        for text, (score, path) in states.items():
            for cand in pos.candidates:
                if cand.weight == -math.inf:
                    continue
                if cand.char == EPSILON:
                    lm = 0.0
                else:
                    try:
                        lm = scorer.score(text, cand.char)
                    except Exception as exc:
                        raise RefinementError(
                            f"scorer failed at position {i} on prefix {text!r} + {cand.char!r}: {exc}"
                        ) from exc
                s = score + _step_score(cand, lm, weights)
                new_text = text + cand.char
                old = nxt.get(new_text)
                if old is None or s > old[0]:
                    nxt[new_text] = (s, path + (cand.char,))
        ranked = sorted(nxt.items(), key=lambda kv: (-kv[1][0], kv[0]))[:beam]
        states = dict(ranked)
    if not states:
        raise RefinementError("no finite-weight path through the lattice")

    finals = []
    for text, (score, path) in states.items():
        try:
            end = scorer.score(text, END)
        except Exception as exc:
            raise RefinementError(f"scorer failed at end of {text!r}: {exc}") from exc
        finals.append((score + weights.w_lm * end, text, path))
    finals.sort(key=lambda f: (-f[0], f[1]))
    best_score, best_text, best_path = finals[0]
    return RefineResult(best_text, best_score, best_path)
