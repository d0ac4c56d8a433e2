"""CER of greedy, N-best top-1 and refined output as posterior noise grows.

Synthesizes both streams for a held-out split of the fixture corpus, trains
the trigram scorer on the rest, and prints one JSON row per noise level.

    python scripts/noise_sweep.py --noise 0 0.1 0.2 0.3 0.4 --seeds 3
"""
from __future__ import annotations

import argparse
import json
import random
from dataclasses import asdict, dataclass, field
from pathlib import Path

from pinrefine.config import DecodeParams, RefineParams, SynthParams
from pinrefine.ctc import greedy_decode
from pinrefine.inventory import shipped_inventory
from pinrefine.metrics import corpus_cer
from pinrefine.pipeline import decode_utterance, pinyin_vocab, refine_record, synth_utterance
from pinrefine.posteriors import StreamVocab
from pinrefine.refine import shipped_dictionary, train_ngram

ROOT = Path(__file__).resolve().parents[1]


@dataclass
class SweepConfig:
    corpus: Path = ROOT / "tests" / "fixtures" / "corpus.txt"
    noise: list[float] = field(default_factory=lambda: [0.0, 0.1, 0.2, 0.3, 0.4])
    seeds: int = 3
    heldout: float = 0.2
    split_seed: int = 0
    decode: DecodeParams = field(default_factory=lambda: DecodeParams(top_n=8))
    refine: RefineParams = field(default_factory=RefineParams)


def run(cfg: SweepConfig) -> list[dict]:
    inv = shipped_inventory()
    dictionary = shipped_dictionary(inv)
    lines = [s for s in cfg.corpus.read_text(encoding="utf-8").splitlines() if s]
    random.Random(cfg.split_seed).shuffle(lines)
    n_test = max(1, int(len(lines) * cfg.heldout))
    test, train = lines[:n_test], lines[n_test:]
    scorer = train_ngram(train, 3, 0.1)
    char_vocab = StreamVocab.build(sorted({c for s in lines for c in s}))
    py_vocab = pinyin_vocab(inv)

    rows = []
    for noise in cfg.noise:
        greedy, top1, refined = [], [], []
        for seed in range(cfg.seeds):
            for i, ref in enumerate(test):
                utt = f"s{i:03d}"
                cm, pm = synth_utterance(ref, utt, char_vocab, py_vocab, dictionary, SynthParams(noise=noise), seed)
                greedy.append((ref, "".join(char_vocab.decode(greedy_decode(cm).tokens))))
                rec = decode_utterance(utt, cm, pm, char_vocab, py_vocab, cfg.decode)
                top1.append((ref, rec.nbest[0].text if rec.nbest else ""))
                refined.append((ref, refine_record(rec, dictionary, scorer, cfg.refine).text))
        rows.append(
            {
                "noise": noise,
                "utterances": len(greedy),
                "cer_greedy": round(corpus_cer(greedy).cer, 4),
                "cer_top1": round(corpus_cer(top1).cer, 4),
                "cer_refined": round(corpus_cer(refined).cer, 4),
            }
        )
    return rows


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--noise", type=float, nargs="+")
    ap.add_argument("--seeds", type=int)
    ap.add_argument("--corpus", type=Path)
    ap.add_argument("--out", type=Path, help="also write rows plus config as JSON")
    args = ap.parse_args()
    cfg = SweepConfig()
    for name in ("noise", "seeds", "corpus"):
        if getattr(args, name) is not None:
            setattr(cfg, name, getattr(args, name))
    rows = run(cfg)
    for row in rows:
        print(json.dumps(row))
    if args.out:
        payload = {"config": json.loads(json.dumps(asdict(cfg), default=str)), "rows": rows}
        args.out.write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")


if __name__ == "__main__":
    main()
