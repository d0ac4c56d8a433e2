"""Toneless Pinyin syllable inventory and segmentation of unspaced Pinyin.

Syllables are ASCII lowercase; the umlaut vowel is written ``v`` (``lv``,
``nve``), the usual input-method convention.
"""
from __future__ import annotations

import io
import re
from dataclasses import dataclass, field
from functools import cached_property
from importlib import resources
from typing import Iterable, Iterator, Sequence, TextIO

_SYLLABLE_RE = re.compile(r"[a-z]+")
SHIPPED_INVENTORY = "pinyin397.txt"


class InventoryError(ValueError):
    """Malformed inventory file."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


class UnsegmentableError(ValueError):
    """No split of the text into inventory syllables exists."""

    def __init__(self, text: str, prefix: str):
        self.text = text
        self.prefix = prefix
        super().__init__(
            f"cannot segment {text!r}; longest segmentable prefix is {prefix!r}"
        )


def normalize(s: str) -> str:
    """Trim, lowercase and fold the umlaut spellings (ü, u:) to ``v``."""
    return s.strip().lower().replace("ü", "v").replace("u:", "v")


@dataclass(frozen=True)
class SyllableInventory:
    syllables: tuple[str, ...]
    index: dict[str, int] = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        index: dict[str, int] = {}
        for i, s in enumerate(self.syllables):
            if not _SYLLABLE_RE.fullmatch(s):
                raise InventoryError(f"illegal syllable {s!r}")
            if s in index:
                raise InventoryError(f"duplicate syllable {s!r}")
            index[s] = i
        object.__setattr__(self, "index", index)

    def __len__(self) -> int:
        return len(self.syllables)

    def __contains__(self, syllable: object) -> bool:
        return syllable in self.index

    def id(self, syllable: str) -> int:
        return self.index[normalize(syllable)]

    def sequence(self, syllables: Iterable[str]) -> "PinyinSequence":
        return PinyinSequence(tuple(self.id(s) for s in syllables), self)

    @cached_property
    def max_len(self) -> int:
        return max((len(s) for s in self.syllables), default=0)


@dataclass(frozen=True)
class PinyinSequence:
    units: tuple[int, ...]
    inventory: SyllableInventory = field(compare=False, repr=False)

    def __post_init__(self) -> None:
        n = len(self.inventory)
        for u in self.units:
            if not 0 <= u < n:
                raise ValueError(f"syllable id {u} outside inventory of size {n}")

    def __len__(self) -> int:
        return len(self.units)

    @property
    def syllables(self) -> list[str]:
        return [self.inventory.syllables[u] for u in self.units]

    def text(self, sep: str = " ") -> str:
        return sep.join(self.syllables)


def load_inventory(source: TextIO) -> SyllableInventory:
    """Read one syllable per line; ``#`` comments and blank lines take no id."""
    syllables: list[str] = []
    seen: dict[str, int] = {}
    for lineno, raw in enumerate(source, start=1):
        if raw.lstrip().startswith("#") or not raw.strip():
            continue
        s = normalize(raw)
        if not _SYLLABLE_RE.fullmatch(s):
            raise InventoryError(f"illegal characters in {raw.strip()!r}", lineno)
        if s in seen:
            raise InventoryError(f"duplicate syllable {s!r} (first on line {seen[s]})", lineno)
        seen[s] = lineno
        syllables.append(s)
    if not syllables:
        raise InventoryError("inventory is empty")
    return SyllableInventory(tuple(syllables))


def shipped_inventory() -> SyllableInventory:
    text = resources.files("pinrefine.data").joinpath(SHIPPED_INVENTORY).read_text("utf-8")
    return load_inventory(io.StringIO(text))


@dataclass(frozen=True)
class Segmentation:
    all: list[PinyinSequence]  # canonical order, possibly truncated
    canonical: PinyinSequence


def segment_pinyin(text: str, inv: SyllableInventory, max_results: int = 64) -> Segmentation:
    """All splits of ``text`` into inventory syllables, in canonical order.

    Canonical order is fewest syllables first, then longer leading syllables
    (compared position by position). Enumeration is lazy in that order, so
    ``max_results`` bounds the work even for highly ambiguous strings.
    """
    if max_results < 1:
        raise ValueError("max_results must be >= 1")
    text = normalize(text)
    if not _SYLLABLE_RE.fullmatch(text) and text:
        raise ValueError(f"pinyin text must match [a-z]*, got {text!r}")
    n = len(text)
    # edges[i]: syllable lengths that match at i, longest first
    edges: list[list[int]] = []
    for i in range(n):
        lens = [
            k for k in range(min(inv.max_len, n - i), 0, -1) if text[i : i + k] in inv.index
        ]
        edges.append(lens)

    # feasible[i]: set of syllable counts r such that text[i:] splits into exactly r
    feasible: list[set[int]] = [set() for _ in range(n + 1)]
    feasible[n].add(0)
    for i in range(n - 1, -1, -1):
        for k in edges[i]:
            feasible[i].update(r + 1 for r in feasible[i + k])

    if not feasible[0]:
        reach = [False] * (n + 1)
        reach[0] = True
        for i in range(n):
            if reach[i]:
                for k in edges[i]:
                    reach[i + k] = True
        longest = max(i for i in range(n + 1) if reach[i])
        raise UnsegmentableError(text, text[:longest])

    def walk(i: int, remaining: int) -> Iterator[list[str]]:
        if i == n:
            yield []
            return
        for k in edges[i]:
            if remaining - 1 in feasible[i + k]:
                head = text[i : i + k]
                for tail in walk(i + k, remaining - 1):
                    yield [head, *tail]

    results: list[PinyinSequence] = []
    for count in sorted(feasible[0]):
        for seq in walk(0, count):
            results.append(inv.sequence(seq))
            if len(results) >= max_results:
                break
        if len(results) >= max_results:
            break
    return Segmentation(all=results, canonical=results[0])


@dataclass(frozen=True)
class ValidationReport:
    unknown: list[tuple[int, str]]

    @property
    def valid(self) -> bool:
        return not self.unknown


def validate_sequence(seq: Sequence[str], inv: SyllableInventory) -> ValidationReport:
    return ValidationReport(
        [(i, s) for i, s in enumerate(seq) if normalize(s) not in inv.index]
    )
