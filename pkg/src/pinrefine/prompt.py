"""The instruction template shared by data construction and chat refinement.

Training instances and inference requests both go through this module so the
two prompts are byte-identical. Bump ``PROMPT_VERSION`` on any wording change.
"""
from __future__ import annotations

import re
from typing import Sequence

PROMPT_VERSION = "1"

INSTRUCTION = (
    "You correct Mandarin lip-reading transcripts. The input gives a toneless "
    "pinyin sequence predicted from video, which may contain errors, and a ranked "
    "list of candidate character transcriptions. Use the pinyin to resolve "
    "homophones and visually confusable characters, and reply with only the "
    "corrected Chinese sentence."
)

_PINYIN_LABEL = "Pinyin: "
_CANDIDATES_LABEL = "Candidates:"
_ITEM_RE = re.compile(r"^(\d+)\. (.*?)(?: \(score (-?\d+\.\d+|-inf)\))?$")


def format_input(pinyin: str, hypotheses: Sequence[str], scores: Sequence[float] | None = None) -> str:
    if not hypotheses:
        raise ValueError("at least one hypothesis is required")
    if scores is not None and len(scores) != len(hypotheses):
        raise ValueError("scores and hypotheses differ in length")
    lines = [_PINYIN_LABEL + pinyin, _CANDIDATES_LABEL]
    for i, hyp in enumerate(hypotheses, start=1):
        item = f"{i}. {hyp}"
        if scores is not None:
            item += f" (score {scores[i - 1]:.4f})"
        lines.append(item)
    return "\n".join(lines)


def parse_input(text: str) -> tuple[str, list[str], list[float] | None]:
    lines = text.split("\n")
    if len(lines) < 3 or not lines[0].startswith(_PINYIN_LABEL) or lines[1] != _CANDIDATES_LABEL:
        raise ValueError("not a refinement prompt input")
    pinyin = lines[0][len(_PINYIN_LABEL):]
    hyps: list[str] = []
    scores: list[float] = []
    for line in lines[2:]:
        m = _ITEM_RE.match(line)
        if not m:
            raise ValueError(f"bad candidate line {line!r}")
        hyps.append(m.group(2))
        if m.group(3) is not None:
            scores.append(float(m.group(3)))
    return pinyin, hyps, (scores if len(scores) == len(hyps) else None)
