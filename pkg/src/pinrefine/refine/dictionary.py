"""Character <-> toneless syllable dictionary.

File format: ``char<TAB>syl[,syl...][<TAB>freq]``. Readings are listed most
common first; the optional third column is a corpus frequency used to rank
homophone expansions (defaults to 0, ties broken by file order).
"""
from __future__ import annotations

import io
from dataclasses import dataclass
from importlib import resources
from typing import TextIO

from ..inventory import SyllableInventory, normalize

SHIPPED_DICTIONARY = "homophones.tsv"


class DictionaryError(ValueError):
    def __init__(self, message: str, line: int):
        self.line = line
        super().__init__(f"line {line}: {message}")


@dataclass(frozen=True)
class HomophoneDictionary:
    inventory: SyllableInventory
    char_to_pinyin: dict[str, tuple[int, ...]]
    pinyin_to_chars: dict[int, tuple[str, ...]]  # most frequent first
    freq: dict[str, int]

    def __contains__(self, char: object) -> bool:
        return char in self.char_to_pinyin

    def __len__(self) -> int:
        return len(self.char_to_pinyin)

    def readings(self, char: str) -> tuple[int, ...]:
        return self.char_to_pinyin.get(char, ())

    def primary_reading(self, char: str) -> int | None:
        r = self.char_to_pinyin.get(char)
        return r[0] if r else None

    def homophones(self, syllable: int, cap: int | None = None) -> tuple[str, ...]:
        chars = self.pinyin_to_chars.get(syllable, ())
        return chars if cap is None else chars[:cap]

    def matches(self, char: str, syllable: int) -> bool:
        """Polyphones match if any of their readings equals ``syllable``."""
        return syllable in self.char_to_pinyin.get(char, ())

    @property
    def chars(self) -> list[str]:
        return list(self.char_to_pinyin)


def load_dictionary(source: TextIO, inventory: SyllableInventory) -> HomophoneDictionary:
    c2p: dict[str, tuple[int, ...]] = {}
    freq: dict[str, int] = {}
    order: dict[str, int] = {}
    for lineno, raw in enumerate(source, start=1):
        line = raw.rstrip("\n")
        if not line.strip() or line.startswith("#"):
            continue
        cols = line.split("\t")
        if len(cols) not in (2, 3):
            raise DictionaryError("expected char<TAB>syllables[<TAB>freq]", lineno)
        char = cols[0]
        if len(char) != 1:
            raise DictionaryError(f"expected a single character, got {char!r}", lineno)
        if char in c2p:
            raise DictionaryError(f"duplicate character {char!r}", lineno)
        ids = []
        for syl in cols[1].split(","):
            s = normalize(syl)
            if s not in inventory:
                raise DictionaryError(f"syllable {s!r} not in inventory", lineno)
            if inventory.index[s] not in ids:
                ids.append(inventory.index[s])
        if not ids:
            raise DictionaryError(f"no readings for {char!r}", lineno)
        try:
            freq[char] = int(cols[2]) if len(cols) == 3 else 0
        except ValueError:
            raise DictionaryError(f"bad frequency {cols[2]!r}", lineno) from None
        c2p[char] = tuple(ids)
        order[char] = len(order)

    buckets: dict[int, list[str]] = {}
    for char, ids in c2p.items():
        for s in ids:
            buckets.setdefault(s, []).append(char)
    p2c = {
        s: tuple(sorted(chars, key=lambda c: (-freq[c], order[c])))
        for s, chars in sorted(buckets.items())
    }
    return HomophoneDictionary(inventory, c2p, p2c, freq)


def shipped_dictionary(inventory: SyllableInventory) -> HomophoneDictionary:
    text = resources.files("pinrefine.data").joinpath(SHIPPED_DICTIONARY).read_text("utf-8")
    return load_dictionary(io.StringIO(text), inventory)


def chars_to_pinyin(text: str, dictionary: HomophoneDictionary) -> list[frozenset[int]]:
    """Reading sets per character; an empty set flags an unknown character."""
    return [frozenset(dictionary.readings(c)) for c in text]


def canonical_pinyin(text: str, dictionary: HomophoneDictionary) -> list[int | None]:
    """Most common reading per character (``None`` where unknown)."""
    return [dictionary.primary_reading(c) for c in text]
