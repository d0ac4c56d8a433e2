"""Regenerate the shipped syllable inventory and homophone dictionary.

Needs ``pypinyin`` and ``jieba`` (dev-only; the runtime package never imports
them). Outputs go to ``src/pinrefine/data/``:

* ``pinyin397.txt``  toneless syllables reachable from GB2312 characters,
  minus colloquial/interjection variants, one per line.
* ``homophones.tsv`` ``char<TAB>syl[,syl...]<TAB>freq``, sorted by frequency.

Reading frequencies come from running pypinyin's phrase-aware conversion over
jieba's word list, weighted by word frequency.  Readings under 5% of a
character's mass are dropped so e.g. 行 keeps xing/hang but not heng.
"""
from __future__ import annotations

import argparse
import collections
import os
from pathlib import Path

import jieba
from pypinyin import Style, lazy_pinyin
from pypinyin.pinyin_dict import pinyin_dict
from pypinyin.style import convert

DATA = Path(__file__).resolve().parents[1] / "src" / "pinrefine" / "data"

# readings that only exist as colloquial variants or interjections
EXCLUDED = ("hng", "lo", "yo", "kei", "shei", "zhei", "chua", "dei")
MIN_SHARE = 0.05


def toneless(reading: str) -> str:
    return convert(reading, Style.NORMAL, strict=True).replace("ü", "v")


def gb2312_chars(level2: bool) -> list[str]:
    hi = 0xF8 if level2 else 0xD8
    out = []
    for b1 in range(0xB0, hi):
        for b2 in range(0xA1, 0xFF):
            try:
                out.append(bytes([b1, b2]).decode("gb2312"))
            except UnicodeDecodeError:
                pass
    return out


def build_inventory() -> list[str]:
    sylls = set()
    for ch in gb2312_chars(level2=False):
        for r in pinyin_dict.get(ord(ch), "").split(","):
            if r:
                sylls.add(toneless(r))
    return sorted(sylls - set(EXCLUDED))


def reading_counts(chars: set[str]) -> tuple[dict, dict]:
    dict_path = os.path.join(os.path.dirname(jieba.__file__), "dict.txt")
    reading = collections.defaultdict(collections.Counter)
    freq = collections.Counter()
    with open(dict_path, encoding="utf-8") as fh:
        for line in fh:
            parts = line.split()
            word, f = parts[0], int(parts[1])
            if not any(c in chars for c in word):
                continue
            sylls = lazy_pinyin(word, style=Style.NORMAL, v_to_u=False, errors="ignore")
            if len(sylls) != len(word):
                continue
            for c, s in zip(word, sylls):
                if c in chars:
                    reading[c][s] += f
                    freq[c] += f
    return reading, freq


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", type=Path, default=DATA)
    ap.add_argument("--extra-chars", type=Path, help="text file whose characters must be covered")
    args = ap.parse_args()

    inventory = build_inventory()
    assert len(inventory) == 397, len(inventory)
    inv_set = set(inventory)
    (args.out / "pinyin397.txt").write_text(
        "# toneless Mandarin syllables, u-umlaut written as v; line order = id\n"
        + "\n".join(inventory) + "\n",
        encoding="utf-8",
    )

    chars = set(gb2312_chars(level2=True))
    if args.extra_chars:
        chars |= {c for c in args.extra_chars.read_text(encoding="utf-8") if "一" <= c <= "鿿"}
    reading, freq = reading_counts(chars)

    rows = []
    for ch in chars:
        counts = reading[ch]
        total = sum(counts.values())
        if total:
            kept = [s for s, n in counts.most_common() if n >= MIN_SHARE * total]
        else:
            kept = lazy_pinyin(ch, style=Style.NORMAL, v_to_u=False)
        kept = [s for s in kept if s in inv_set]
        if kept:
            rows.append((ch, kept, freq[ch]))
    rows.sort(key=lambda r: (-r[2], r[0]))
    with open(args.out / "homophones.tsv", "w", encoding="utf-8", newline="\n") as fh:
        fh.write("# char\treadings (most frequent first)\tfrequency prior\n")
        for ch, kept, f in rows:
            fh.write(f"{ch}\t{','.join(kept)}\t{f}\n")
    print(f"inventory={len(inventory)} dictionary={len(rows)}")


if __name__ == "__main__":
    main()
