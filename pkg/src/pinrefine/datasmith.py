"""Instruction-tuning data built from hypotheses with controlled error rates.

Real multi-checkpoint decoding is emulated by homophone-biased corruption of
the reference; decoded N-best files can be mixed in as additional sources.
"""
from __future__ import annotations

import hashlib
import json
import math
import random
from dataclasses import asdict, dataclass, field
from typing import Callable, Iterable, Sequence

from .inventory import SyllableInventory, UnsegmentableError, segment_pinyin
from .metrics import cer, edit_counts
from .prompt import INSTRUCTION, format_input, parse_input
from .records import NBestRecord, dumps
from .refine.dictionary import HomophoneDictionary, canonical_pinyin

SUB, DEL, INS = "sub", "del", "ins"
HOMOPHONE_POOL = 16


def derive_seed(*parts: object) -> int:
    digest = hashlib.sha256("\x1f".join(map(str, parts)).encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little")


@dataclass(frozen=True)
class EditMix:
    p_sub: float = 1.0
    p_del: float = 0.0
    p_ins: float = 0.0

    def __post_init__(self) -> None:
        ps = (self.p_sub, self.p_del, self.p_ins)
        if any(p < 0 for p in ps) or not math.isclose(sum(ps), 1.0, abs_tol=1e-9):
            raise ValueError(f"edit mix must be non-negative and sum to 1, got {ps}")


def _edit_count(cer_target: float, n: int) -> int:
    # round first so 0.3 * 10 does not become 4 through 3.0000000000000004
    return math.ceil(round(cer_target * n, 9))


def _apply_edits(
    seq: Sequence[str],
    n_edits: int,
    mix: EditMix,
    rng: random.Random,
    substitute: Callable[[str], str],
    insert: Callable[[], str],
) -> list[str]:
    """Edit ``n_edits`` distinct positions, retrying until the distance is exact.

    Indels inside runs of a repeated token can cancel out, so the second half
    of the attempts uses substitutions only. The closest attempt is returned.
    """
    best: list[str] = list(seq)
    best_gap = n_edits
    tries = 32
    for attempt in range(tries):
        weights = (mix.p_sub, mix.p_del, mix.p_ins) if attempt < tries // 2 else (1.0, 0.0, 0.0)
        positions = set(rng.sample(range(len(seq)), n_edits))
        ops = iter(rng.choices((SUB, DEL, INS), weights=weights, k=n_edits))
        out: list[str] = []
        for i, tok in enumerate(seq):
            if i not in positions:
                out.append(tok)
                continue
            op = next(ops)
            if op == SUB:
                out.append(substitute(tok))
            elif op == INS:
                out.extend((insert(), tok))
        gap = abs(edit_counts(list(seq), out).errors - n_edits)
        if gap < best_gap or attempt == 0:
            best, best_gap = out, gap
        if gap == 0:
            break
    return best


def corrupt(
    text: str,
    cer_target: float,
    mix: EditMix,
    dictionary: HomophoneDictionary,
    seed: int,
    homophone_prob: float = 0.7,
) -> str:
    """Apply ``ceil(cer_target * len(text))`` character edits.

    Substitutions pick one of the frequent homophones of the original with
    probability ``homophone_prob``, otherwise any dictionary character.
    """
    if not text:
        raise ValueError("cannot corrupt empty text")
    if not 0.0 <= cer_target < 1.0:
        raise ValueError(f"cer_target must lie in [0, 1), got {cer_target}")
    n_edits = _edit_count(cer_target, len(text))
    if n_edits == 0:
        return text
    rng = random.Random(seed)
    pool = dictionary.chars

    def random_char(exclude: str) -> str:
        while True:
            c = rng.choice(pool)
            if c != exclude:
                return c

    def substitute(c: str) -> str:
        if rng.random() < homophone_prob:
            homs = []
            for s in dictionary.readings(c):
                homs.extend(h for h in dictionary.homophones(s, HOMOPHONE_POOL) if h != c and h not in homs)
            if homs:
                return rng.choice(homs)
        return random_char(c)

    return "".join(_apply_edits(text, n_edits, mix, rng, substitute, lambda: random_char("")))


def corrupt_pinyin(
    syllables: Sequence[str], cer_target: float, mix: EditMix, inventory: SyllableInventory, seed: int
) -> list[str]:
    """Syllable-level corruption; substitutes prefer syllables one letter away."""
    n_edits = _edit_count(cer_target, len(syllables))
    if n_edits == 0 or not syllables:
        return list(syllables)
    rng = random.Random(seed)
    pool = inventory.syllables

    def substitute(s: str) -> str:
        near = [o for o in pool if o != s and _one_edit(s, o)]
        return rng.choice(near) if near else rng.choice([o for o in pool if o != s])

    return _apply_edits(syllables, n_edits, mix, rng, substitute, lambda: rng.choice(pool))


def _one_edit(a: str, b: str) -> bool:
    if abs(len(a) - len(b)) > 1:
        return False
    return edit_counts(list(a), list(b)).errors == 1


@dataclass(frozen=True)
class CorruptionSource:
    """Emulates one training checkpoint by its error rate."""

    name: str
    cer_target: float
    mix: EditMix = EditMix()
    nbest: int = 3
    pinyin_cer: float = 0.0
    homophone_prob: float = 0.7

    def key(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)


@dataclass(frozen=True)
class NBestSource:
    """Hypotheses decoded by a real model, keyed by utterance id."""

    name: str
    records: dict[str, NBestRecord]

    def key(self) -> str:
        return self.name


@dataclass(frozen=True)
class InstructionInstance:
    instruction: str
    input: str
    output: str
    flagged: bool = field(default=False, compare=False)
    source: str = field(default="", compare=False)

    def to_dict(self) -> dict:
        return {"instruction": self.instruction, "input": self.input, "output": self.output}

    def to_json(self) -> str:
        return dumps(self.to_dict())


def pinyin_segmentable(pinyin: str, inventory: SyllableInventory) -> bool:
    try:
        for chunk in pinyin.split():
            segment_pinyin(chunk, inventory, max_results=1)
    except (UnsegmentableError, ValueError):
        return False
    return True


@dataclass
class BuildResult:
    instances: list[InstructionInstance]
    dedup_removed: int = 0
    flagged: int = 0
    missing: int = 0  # (ref, N-best source) pairs without a record


def build_instances(
    refs: Iterable[tuple[str, str]],
    sources: Sequence[CorruptionSource | NBestSource],
    dictionary: HomophoneDictionary,
    inventory: SyllableInventory,
    seed: int = 0,
    include_scores: bool = False,
) -> BuildResult:
    """One instance per (reference, source), deduplicated on (input, output)."""
    result = BuildResult([])
    seen: set[tuple[str, str]] = set()
    for utt, ref in refs:
        if not ref:
            raise ValueError(f"empty reference for {utt!r}")
        for src in sources:
            scores = None
            flagged = False
            if isinstance(src, NBestSource):
                rec = src.records.get(utt)
                if rec is None or not rec.nbest:
                    result.missing += 1
                    continue
                hyps = [h.text for h in rec.nbest]
                scores = [h.log_score for h in rec.nbest]
                if rec.pinyin.strip():
                    pinyin = rec.pinyin.strip()
                else:
                    pinyin, flagged = _reference_pinyin(ref, dictionary)
            else:
                hyps = []
                for i in range(src.nbest):
                    h = corrupt(
                        ref, src.cer_target, src.mix, dictionary,
                        derive_seed(seed, src.key(), utt, "hyp", i), src.homophone_prob,
                    )
                    if h not in hyps:
                        hyps.append(h)
                pinyin, flagged = _reference_pinyin(ref, dictionary)
                if src.pinyin_cer > 0 and pinyin:
                    pinyin = " ".join(corrupt_pinyin(
                        pinyin.split(), src.pinyin_cer, src.mix, inventory,
                        derive_seed(seed, src.key(), utt, "pinyin"),
                    ))
            flagged = flagged or not pinyin_segmentable(pinyin, inventory)
            inst = InstructionInstance(
                INSTRUCTION,
                format_input(pinyin, hyps, scores if include_scores else None),
                ref,
                flagged=flagged,
                source=src.name,
            )
            if (inst.input, inst.output) in seen:
                result.dedup_removed += 1
                continue
            seen.add((inst.input, inst.output))
            result.flagged += flagged
            result.instances.append(inst)
    return result


def _reference_pinyin(text: str, dictionary: HomophoneDictionary) -> tuple[str, bool]:
    ids = canonical_pinyin(text, dictionary)
    syl = dictionary.inventory.syllables
    return " ".join(syl[i] for i in ids if i is not None), any(i is None for i in ids)


@dataclass
class DatasetStats:
    count: int
    dedup_removed: int
    flagged: int
    zero_cer: int
    histogram: list[tuple[float, float, int]]
    by_source: dict[str, list[tuple[float, float, int]]]

    def to_dict(self) -> dict:
        def hist(h):
            return [{"lo": lo, "hi": None if math.isinf(hi) else hi, "count": n} for lo, hi, n in h]

        return {
            "count": self.count,
            "dedup_removed": self.dedup_removed,
            "flagged": self.flagged,
            "zero_cer": self.zero_cer,
            "cer_histogram": hist(self.histogram),
            "by_source": {k: hist(v) for k, v in sorted(self.by_source.items())},
        }


def _bin_edges(width: float) -> list[tuple[float, float]]:
    n = round(1.0 / width)
    return [(round(i * width, 10), round((i + 1) * width, 10)) for i in range(n)] + [(1.0, math.inf)]


def dataset_stats(
    instances: Sequence[InstructionInstance],
    dedup_removed: int = 0,
    inventory: SyllableInventory | None = None,
    bin_width: float = 0.1,
) -> DatasetStats:
    """Counts plus a histogram of top-1 CER against the output.

    Bins are ``[lo, hi)`` of width ``bin_width`` with a final ``[1, inf)``
    bin. With ``inventory`` given, the flag is recomputed from the input
    rather than trusted, which is what you want for instances read from disk.
    """
    edges = _bin_edges(bin_width)
    hist = [0] * len(edges)
    by_source: dict[str, list[int]] = {}
    zero = flagged = 0
    for inst in instances:
        pinyin, hyps, _ = parse_input(inst.input)
        c = cer(edit_counts(inst.output, hyps[0]))
        b = min(int(c / bin_width + 1e-9), len(edges) - 1)
        hist[b] += 1
        if inst.source:
            by_source.setdefault(inst.source, [0] * len(edges))[b] += 1
        zero += c == 0
        if inventory is not None:
            flagged += not pinyin_segmentable(pinyin, inventory)
        else:
            flagged += inst.flagged

    def table(counts: list[int]) -> list[tuple[float, float, int]]:
        return [(lo, hi, n) for (lo, hi), n in zip(edges, counts)]

    return DatasetStats(
        count=len(instances),
        dedup_removed=dedup_removed,
        flagged=flagged,
        zero_cer=zero,
        histogram=table(hist),
        by_source={k: table(v) for k, v in by_source.items()},
    )


def write_instances(path, instances: Iterable[InstructionInstance]) -> int:
    n = 0
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for inst in instances:
            fh.write(inst.to_json() + "\n")
            n += 1
    return n


def read_instances(path) -> list[InstructionInstance]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                d = json.loads(line)
                out.append(InstructionInstance(d["instruction"], d["input"], d["output"]))
    return out
