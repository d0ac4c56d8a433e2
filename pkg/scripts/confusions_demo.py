"""Refine the three first-pass homophone confusions (银航, 夏雨, 导论) with a fixture trigram.

    python scripts/confusions_demo.py [--corpus tests/fixtures/corpus.txt]
"""
from __future__ import annotations

import argparse
import math
from dataclasses import dataclass
from pathlib import Path

from pinrefine.inventory import shipped_inventory
from pinrefine.pipeline import parse_pinyin
from pinrefine.records import ScoredText
from pinrefine.refine import RefineWeights, build_lattice, refine, shipped_dictionary, train_ngram

ROOT = Path(__file__).resolve().parents[1]

CASES = [
    ("我想去银行", "我想去银航", "wo xiang qu yin hang"),
    ("今天可能会下雨", "今天可能会夏雨", "jin tian ke neng hui xia yu"),
    ("他正在开会讨论", "他正在开会导论", "ta zheng zai kai hui tao lun"),
]


@dataclass
class DemoConfig:
    corpus: Path = ROOT / "tests" / "fixtures" / "corpus.txt"
    order: int = 3
    k: float = 0.1
    stage1_prob: float = 0.3


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--corpus", type=Path, default=DemoConfig.corpus)
    ap.add_argument("--order", type=int, default=DemoConfig.order)
    args = ap.parse_args()
    cfg = DemoConfig(corpus=args.corpus, order=args.order)

    inv = shipped_inventory()
    dictionary = shipped_dictionary(inv)
    scorer = train_ngram(cfg.corpus.read_text(encoding="utf-8").splitlines(), cfg.order, cfg.k)
    print(f"{'truth':<10}{'first pass':<12}{'refined':<10}ok")
    for truth, stage1, pinyin in CASES:
        lattice = build_lattice(
            parse_pinyin(pinyin, inv), [ScoredText(stage1, math.log(cfg.stage1_prob))], dictionary
        )
        out = refine(lattice, scorer, RefineWeights())
        print(f"{truth:<10}{stage1:<12}{out.text:<10}{'yes' if out.text == truth else 'NO'}")


if __name__ == "__main__":
    main()
