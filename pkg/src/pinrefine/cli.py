"""Command-line entry point: ``pinrefine <subcommand> ...``.

Failures exit non-zero with one JSON line on stderr:
``{"error": "<ExceptionType>", "message": "..."}``.
"""
from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Callable, Iterable, Sequence, TypeVar

import numpy as np

from . import config as config_mod
from .ctc import ctc_loss
from .datasmith import (
    CorruptionSource,
    EditMix,
    NBestSource,
    build_instances,
    dataset_stats,
    write_instances,
)
from .inventory import segment_pinyin, validate_sequence
from .losses import DEFAULT_ALPHA, DEFAULT_LAMBDA_CTC, combine, cross_entropy, finite_diff_check
from .metrics import corpus_cer
from .pipeline import (
    decode_utterance,
    dump_vocab,
    load_resources,
    load_vocab,
    pinyin_vocab,
    read_manifest,
    refine_record,
    synth_utterance,
)
from .posteriors import StreamVocab, load_posteriors, save_posteriors
from .prompt import format_input
from .records import RefinedRecord, dumps, read_jsonl, read_nbest, read_refs, write_jsonl
from .refine.chat import EndpointConfig, chat_refine_batch
from .refine.ngram import NGramScorer, train_ngram

T = TypeVar("T")
R = TypeVar("R")
log = logging.getLogger("pinrefine")


class CliError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str) -> None:  # single-line, machine-parseable
        sys.stderr.write(dumps({"error": "UsageError", "message": message}) + "\n")
        sys.exit(2)


def _pmap(fn: Callable[[T], R], items: Sequence[T], jobs: int) -> list[R]:
    if jobs <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items))


def _emit(obj: dict, out: str | None = None) -> None:
    text = json.dumps(obj, ensure_ascii=False, indent=2, sort_keys=True) + "\n"
    if out:
        Path(out).write_text(text, encoding="utf-8")
    sys.stdout.write(text)


def _config(args: argparse.Namespace, overrides: dict) -> config_mod.RunConfig:
    overrides = {"seed": args.seed, "jobs": args.jobs, **overrides}
    cfg = config_mod.load_config(args.config, overrides)
    cfg.validate()
    return cfg


def _persist(cfg: config_mod.RunConfig, out: str | Path) -> None:
    out = Path(out)
    target = out / "run_config.json" if out.is_dir() else out.with_name(out.name + ".config.json")
    cfg.save(target)


# -- subcommands -----------------------------------------------------------


def cmd_inventory(args: argparse.Namespace) -> None:
    cfg = _config(args, {"paths.inventory": args.inventory})
    inv, _ = load_resources(cfg)
    report = {
        "size": len(inv),
        "sample": list(inv.syllables[: args.sample]),
        "valid": validate_sequence(list(inv.syllables), inv).valid,
    }
    if args.segment is not None:
        seg = segment_pinyin(args.segment, inv, max_results=args.max_results)
        report["segmentation"] = {
            "text": args.segment,
            "canonical": seg.canonical.syllables,
            "all": [s.syllables for s in seg.all],
        }
    _emit(report)


def cmd_synth(args: argparse.Namespace) -> None:
    cfg = _config(
        args,
        {"synth.noise": args.noise, "synth.frames_per_token": args.frames_per_token, "synth.blank_gap": args.blank_gap},
    )
    _, dictionary = load_resources(cfg)
    refs = read_refs(args.transcripts)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    chars = sorted({c for _, text in refs for c in text})
    char_vocab = StreamVocab.build(chars)
    py_vocab = pinyin_vocab(dictionary.inventory)
    dump_vocab(char_vocab, out / "char_vocab.txt")
    dump_vocab(py_vocab, out / "pinyin_vocab.txt")

    def one(item: tuple[str, str]) -> str:
        utt, text = item
        cm, pm = synth_utterance(text, utt, char_vocab, py_vocab, dictionary, cfg.synth, cfg.seed)
        save_posteriors(cm, out / f"{utt}.char.vppm")
        save_posteriors(pm, out / f"{utt}.pinyin.vppm")
        return utt

    utts = _pmap(one, refs, cfg.jobs)
    (out / "manifest.txt").write_text("".join(u + "\n" for u in utts), encoding="utf-8")
    _persist(cfg, out)
    _emit({"utterances": len(utts), "char_vocab": len(char_vocab), "pinyin_vocab": len(py_vocab), "out": str(out)})


def cmd_decode(args: argparse.Namespace) -> None:
    cfg = _config(
        args,
        {
            "paths.posteriors": args.posteriors,
            "decode.beam_width": args.beam_width,
            "decode.k": args.k,
            "decode.top_n": args.top_n,
        },
    )
    pdir = Path(cfg.paths.posteriors or args.posteriors)
    char_vocab = load_vocab(cfg.paths.char_vocab or pdir / "char_vocab.txt")
    py_path = Path(cfg.paths.pinyin_vocab or pdir / "pinyin_vocab.txt")
    py_vocab = load_vocab(py_path) if py_path.exists() else None

    def one(utt: str) -> dict:
        cm = load_posteriors(pdir / f"{utt}.char.vppm")
        pfile = pdir / f"{utt}.pinyin.vppm"
        pm = load_posteriors(pfile) if pfile.exists() and py_vocab else None
        return decode_utterance(utt, cm, pm, char_vocab, py_vocab, cfg.decode).to_dict()

    rows = _pmap(one, read_manifest(pdir), cfg.jobs)
    write_jsonl(args.out, rows)
    _persist(cfg, args.out)
    _emit({"utterances": len(rows), "out": args.out})


def cmd_refine(args: argparse.Namespace) -> None:
    cfg = _config(
        args,
        {
            "paths.lm": args.lm,
            "paths.corpus": args.corpus,
            "refine.w_lm": args.w_lm,
            "refine.w_ac": args.w_ac,
            "refine.w_py": args.w_py,
            "refine.beam": args.beam,
            "refine.expansion_cap": args.expansion_cap,
            "refine.include_scores": args.include_scores,
            "endpoint.url": args.endpoint_url,
            "endpoint.model": args.model,
        },
    )
    _, dictionary = load_resources(cfg)
    records = read_nbest(args.nbest)

    if args.backend == "ngram":
        if cfg.paths.lm:
            scorer = NGramScorer.load(cfg.paths.lm)
        elif cfg.paths.corpus:
            scorer = train_ngram(_read_lines(cfg.paths.corpus), cfg.lm.order, cfg.lm.k)
        else:
            raise CliError("ngram backend needs --lm or --corpus")
        out_rows = _pmap(lambda r: refine_record(r, dictionary, scorer, cfg.refine), records, cfg.jobs)
    else:
        ep = cfg.endpoint
        if not ep.url or not ep.model:
            raise CliError("chat backend needs endpoint url and model")
        endpoint = EndpointConfig(
            ep.url, ep.model, ep.api_key_env, ep.timeout, ep.max_retries, max_concurrency=ep.max_concurrency
        )
        usable = [r for r in records if r.nbest]
        inputs = [
            format_input(
                r.pinyin,
                [h.text for h in r.nbest],
                [h.log_score for h in r.nbest] if cfg.refine.include_scores else None,
            )
            for r in usable
        ]
        outcomes = iter(chat_refine_batch(inputs, [r.nbest[0].text for r in usable], endpoint))
        out_rows = []
        for r in records:
            if not r.nbest:
                out_rows.append(RefinedRecord(r.utt, "", None, "fallback", "empty N-best list"))
                continue
            o = next(outcomes)
            score = None if o.source == "chat" else r.nbest[0].log_score
            out_rows.append(RefinedRecord(r.utt, o.text, score, o.source, o.error))

    write_jsonl(args.out, (r.to_dict() for r in out_rows))
    _persist(cfg, args.out)
    sources: dict[str, int] = {}
    for r in out_rows:
        sources[r.source] = sources.get(r.source, 0) + 1
    _emit({"utterances": len(out_rows), "sources": sources, "out": args.out})


def _read_lines(path: str | Path) -> list[str]:
    return Path(path).read_text(encoding="utf-8").splitlines()


def _hyp_text(row: dict) -> str:
    if "text" in row:
        return row["text"]
    nbest = row.get("nbest") or []
    return nbest[0]["text"] if nbest else ""


def cmd_eval(args: argparse.Namespace) -> None:
    refs = read_refs(args.refs)
    hyps = {row["utt"]: _hyp_text(row) for row in read_jsonl(args.hyps)}
    missing = [utt for utt, _ in refs if utt not in hyps]
    pairs = [(ref, hyps.get(utt, "")) for utt, ref in refs]
    report = corpus_cer(pairs)
    out = report.to_dict()
    out["missing_hypotheses"] = len(missing)
    if args.per_utt:
        with open(args.per_utt, "w", encoding="utf-8", newline="\n") as fh:
            fh.write("utt\tS\tD\tI\tN\tref\thyp\n")
            for (utt, ref), (_, hyp), c in zip(refs, pairs, report.per_utterance):
                fh.write(f"{utt}\t{c.S}\t{c.D}\t{c.I}\t{c.N}\t{ref}\t{hyp}\n")
    _emit(out, args.out)


def _parse_source(spec: str) -> dict:
    name, sep, cer_target = spec.partition(":")
    if not sep:
        raise CliError(f"--source expects name:cer, got {spec!r}")
    return {"name": name, "cer_target": float(cer_target)}


def cmd_build_data(args: argparse.Namespace) -> None:
    overrides = {"corruption.nbest": args.nbest_size, "corruption.pinyin_cer": args.pinyin_cer}
    if args.source:
        overrides["corruption.sources"] = [_parse_source(s) for s in args.source]
    cfg = _config(args, overrides)
    inv, dictionary = load_resources(cfg)
    refs = read_refs(args.refs)
    c = cfg.corruption
    mix = EditMix(c.p_sub, c.p_del, c.p_ins)
    sources: list = [
        CorruptionSource(
            s["name"], float(s["cer_target"]), mix, int(s.get("nbest", c.nbest)),
            float(s.get("pinyin_cer", c.pinyin_cer)), float(s.get("homophone_prob", c.homophone_prob)),
        )
        for s in c.sources
    ]
    for path in args.nbest or []:
        sources.append(NBestSource(Path(path).stem, {r.utt: r for r in read_nbest(path)}))
    result = build_instances(refs, sources, dictionary, inv, cfg.seed, cfg.refine.include_scores)
    write_instances(args.out, result.instances)
    stats = dataset_stats(result.instances, result.dedup_removed).to_dict()
    stats["missing"] = result.missing
    Path(args.out + ".stats.json").write_text(
        json.dumps(stats, ensure_ascii=False, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    _persist(cfg, args.out)
    _emit(stats)


def cmd_lm_train(args: argparse.Namespace) -> None:
    cfg = _config(args, {"paths.corpus": args.corpus, "lm.order": args.order, "lm.k": args.k})
    scorer = train_ngram(_read_lines(cfg.paths.corpus), cfg.lm.order, cfg.lm.k)
    scorer.save(args.out)
    _persist(cfg, args.out)
    _emit({"order": scorer.order, "k": scorer.k, "vocab": len(scorer.vocab), "contexts": len(scorer.counts), "out": args.out})


def cmd_loss_check(args: argparse.Namespace) -> None:
    cfg = _config(args, {})
    rng = np.random.default_rng(cfg.seed)
    lam = DEFAULT_LAMBDA_CTC if args.lambda_ctc is None else args.lambda_ctc
    alpha = DEFAULT_ALPHA if args.alpha is None else args.alpha

    def stream() -> tuple[float, float, float, float]:
        V, T, L = args.vocab, args.frames, args.target_len
        logits = rng.normal(size=(T, V))
        logp = logits - np.logaddexp.reduce(logits, axis=1, keepdims=True)
        target = rng.integers(1, V, size=L).tolist()
        l_ctc, _ = ctc_loss(logp, target)
        ce_logits = rng.normal(size=(L, V))
        l_ce, _ = cross_entropy(ce_logits, target)
        err_ctc = finite_diff_check(lambda x: ctc_loss(x, target), logp, args.eps)
        err_ce = finite_diff_check(lambda x: cross_entropy(x, target), ce_logits, args.eps)
        return l_ctc, l_ce, err_ctc, err_ce

    c_ctc, c_ce, c_err_ctc, c_err_ce = stream()
    p_ctc, p_ce, p_err_ctc, p_err_ce = stream()
    breakdown = combine(lam, alpha, c_ctc, c_ce, p_ctc, p_ce)
    worst = max(c_err_ctc, c_err_ce, p_err_ctc, p_err_ce)
    _emit(
        {
            "breakdown": breakdown.to_dict(),
            "gradient_check": {
                "eps": args.eps,
                "char_ctc": c_err_ctc,
                "char_ce": c_err_ce,
                "pinyin_ctc": p_err_ctc,
                "pinyin_ce": p_err_ce,
                "max_rel_error": worst,
                "pass": worst <= args.tol,
            },
        }
    )
    if not worst <= args.tol or not math.isfinite(breakdown.l_total):
        raise CliError(f"gradient check failed: max relative error {worst:.3g} > {args.tol}")


# -- parser ----------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON run configuration")
    common.add_argument("--seed", type=int)
    common.add_argument("--jobs", type=int, help="utterance-level parallelism")
    common.add_argument("-v", "--verbose", action="store_true")

    p = _Parser(prog="pinrefine", description="Pinyin-guided decoding and refinement for Mandarin lip reading.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("inventory", parents=[common], help="report on the syllable inventory")
    s.add_argument("--inventory")
    s.add_argument("--sample", type=int, default=10)
    s.add_argument("--segment", help="unspaced pinyin to segment")
    s.add_argument("--max-results", type=int, default=16)
    s.set_defaults(func=cmd_inventory)

    s = sub.add_parser("synth", parents=[common], help="synthesize VPPM posteriors from transcripts")
    s.add_argument("--transcripts", required=True, help="utt<TAB>text file")
    s.add_argument("--out", required=True, help="output directory")
    s.add_argument("--noise", type=float)
    s.add_argument("--frames-per-token", type=int)
    s.add_argument("--blank-gap", type=int)
    s.set_defaults(func=cmd_synth)

    s = sub.add_parser("decode", parents=[common], help="N-best decode a posterior directory")
    s.add_argument("--posteriors", required=True)
    s.add_argument("--out", required=True, help="N-best JSONL")
    s.add_argument("--beam-width", type=int)
    s.add_argument("-k", type=int)
    s.add_argument("--top-n", type=int)
    s.set_defaults(func=cmd_decode)

    s = sub.add_parser("refine", parents=[common], help="refine N-best records")
    s.add_argument("--nbest", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--backend", choices=("ngram", "chat"), default="ngram")
    s.add_argument("--lm", help="serialized n-gram scorer")
    s.add_argument("--corpus", help="train an n-gram scorer on the fly")
    s.add_argument("--w-lm", type=float)
    s.add_argument("--w-ac", type=float)
    s.add_argument("--w-py", type=float)
    s.add_argument("--beam", type=int)
    s.add_argument("--expansion-cap", type=int)
    s.add_argument("--include-scores", action="store_true", default=None)
    s.add_argument("--endpoint-url")
    s.add_argument("--model")
    s.set_defaults(func=cmd_refine)

    s = sub.add_parser("eval", parents=[common], help="CER of hypotheses against references")
    s.add_argument("--refs", required=True)
    s.add_argument("--hyps", required=True, help="refined or N-best JSONL")
    s.add_argument("--per-utt", help="write a per-utterance TSV")
    s.add_argument("--out", help="also write the report here")
    s.set_defaults(func=cmd_eval)

    s = sub.add_parser("build-data", parents=[common], help="build instruction-tuning instances")
    s.add_argument("--refs", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--source", action="append", help="corruption source name:cer (repeatable)")
    s.add_argument("--nbest", action="append", help="decoded N-best JSONL used as a source (repeatable)")
    s.add_argument("--nbest-size", type=int)
    s.add_argument("--pinyin-cer", type=float)
    s.set_defaults(func=cmd_build_data)

    s = sub.add_parser("lm-train", parents=[common], help="train a character n-gram scorer")
    s.add_argument("--corpus", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--order", type=int)
    s.add_argument("--k", type=float)
    s.set_defaults(func=cmd_lm_train)

    s = sub.add_parser("loss-check", parents=[common], help="loss breakdown plus gradient checks")
    s.add_argument("--lambda-ctc", type=float)
    s.add_argument("--alpha", type=float)
    s.add_argument("--frames", type=int, default=6)
    s.add_argument("--vocab", type=int, default=5)
    s.add_argument("--target-len", type=int, default=3)
    s.add_argument("--eps", type=float, default=1e-5)
    s.add_argument("--tol", type=float, default=1e-4)
    s.set_defaults(func=cmd_loss_check)
    return p


def main(argv: Iterable[str] | None = None) -> int:
    args = build_parser().parse_args(list(argv) if argv is not None else None)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.ERROR, format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except Exception as exc:  # noqa: BLE001 - every failure becomes one stderr line
        msg = " ".join(str(exc).split())
        sys.stderr.write(dumps({"error": type(exc).__name__, "message": msg}) + "\n")
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
