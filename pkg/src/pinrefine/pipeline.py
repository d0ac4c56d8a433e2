"""Per-utterance glue between posterior decoding and refinement."""
from __future__ import annotations

import io
import logging
from pathlib import Path

from .config import DecodeParams, RefineParams, RunConfig, SynthParams
from .ctc import greedy_decode, prefix_beam_search
from .datasmith import derive_seed
from .inventory import PinyinSequence, SyllableInventory, load_inventory, segment_pinyin, shipped_inventory
from .posteriors import PosteriorMatrix, StreamVocab, synth_posteriors
from .records import NBestRecord, RefinedRecord, ScoredText
from .refine.dictionary import HomophoneDictionary, canonical_pinyin, load_dictionary, shipped_dictionary
from .refine.lattice import RefineWeights, build_lattice, refine
from .refine.ngram import Scorer

log = logging.getLogger(__name__)


def load_resources(cfg: RunConfig) -> tuple[SyllableInventory, HomophoneDictionary]:
    if cfg.paths.inventory:
        with open(cfg.paths.inventory, encoding="utf-8") as fh:
            inv = load_inventory(fh)
    else:
        inv = shipped_inventory()
    if cfg.paths.dictionary:
        with open(cfg.paths.dictionary, encoding="utf-8") as fh:
            dictionary = load_dictionary(fh, inv)
    else:
        dictionary = shipped_dictionary(inv)
    return inv, dictionary


def pinyin_vocab(inv: SyllableInventory) -> StreamVocab:
    return StreamVocab.build(inv.syllables)


def parse_pinyin(text: str, inv: SyllableInventory) -> PinyinSequence:
    """Space-separated syllables; a chunk may itself be unspaced Pinyin."""
    units: list[int] = []
    for chunk in text.split():
        units.extend(segment_pinyin(chunk, inv, max_results=1).canonical.units)
    return PinyinSequence(tuple(units), inv)


def synth_utterance(
    text: str,
    utt: str,
    char_vocab: StreamVocab,
    py_vocab: StreamVocab,
    dictionary: HomophoneDictionary,
    params: SynthParams,
    seed: int,
) -> tuple[PosteriorMatrix, PosteriorMatrix]:
    char_ids = char_vocab.encode(text)
    syl = dictionary.inventory.syllables
    py_tokens = [syl[i] for i in canonical_pinyin(text, dictionary) if i is not None]
    py_ids = py_vocab.encode(py_tokens)

    def make(ids: list[int], vocab: StreamVocab, stream: str) -> PosteriorMatrix:
        return synth_posteriors(
            ids, len(vocab), params.frames_per_token, params.blank_gap, params.noise,
            derive_seed(seed, utt, stream),
        )

    return make(char_ids, char_vocab, "char"), make(py_ids, py_vocab, "pinyin")


def decode_utterance(
    utt: str,
    char_post: PosteriorMatrix,
    py_post: PosteriorMatrix | None,
    char_vocab: StreamVocab,
    py_vocab: StreamVocab | None,
    params: DecodeParams,
) -> NBestRecord:
    """Prefix beam N-best on the character stream, greedy best on the Pinyin stream."""
    nbest = prefix_beam_search(char_post, params.beam_width, params.k, top_n=params.top_n)
    hyps = [ScoredText("".join(char_vocab.decode(h.tokens)), h.log_score) for h in nbest]
    pinyin = ""
    if py_post is not None and py_vocab is not None:
        pinyin = " ".join(py_vocab.decode(greedy_decode(py_post).tokens))
    return NBestRecord(utt, hyps, pinyin)


def refine_record(
    rec: NBestRecord,
    dictionary: HomophoneDictionary,
    scorer: Scorer,
    params: RefineParams,
) -> RefinedRecord:
    """Lattice refinement of one N-best record; degrades to the top-1 on bad input."""
    if not rec.nbest:
        return RefinedRecord(rec.utt, "", None, "fallback", "empty N-best list")
    try:
        pinyin = parse_pinyin(rec.pinyin, dictionary.inventory)
    except ValueError as exc:
        log.warning("%s: unusable pinyin %r (%s); keeping top-1", rec.utt, rec.pinyin, exc)
        top = rec.nbest[0]
        return RefinedRecord(rec.utt, top.text, top.log_score, "fallback", str(exc))
    lattice = build_lattice(
        pinyin,
        rec.nbest,
        dictionary,
        expansion_cap=params.expansion_cap,
        floor_weight=params.floor_weight,
        pooling=params.pooling,
        scale_expansions=params.scale_expansions,
    )
    result = refine(lattice, scorer, RefineWeights(params.w_lm, params.w_ac, params.w_py), params.beam)
    return RefinedRecord(rec.utt, result.text, result.log_score, "ngram")


def read_manifest(directory: str | Path) -> list[str]:
    """Utterance ids in synthesis order (falls back to sorted file names)."""
    d = Path(directory)
    manifest = d / "manifest.txt"
    if manifest.exists():
        return [line.strip() for line in manifest.read_text(encoding="utf-8").splitlines() if line.strip()]
    return sorted(p.name[: -len(".char.vppm")] for p in d.glob("*.char.vppm"))


def load_vocab(path: str | Path) -> StreamVocab:
    with open(path, encoding="utf-8") as fh:
        return StreamVocab.load(fh)


def dump_vocab(vocab: StreamVocab, path: str | Path) -> None:
    buf = io.StringIO()
    vocab.dump(buf)
    Path(path).write_text(buf.getvalue(), encoding="utf-8")
