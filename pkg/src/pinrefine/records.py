"""Line-delimited JSON records exchanged between pipeline stages."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator


@dataclass(frozen=True)
class ScoredText:
    text: str
    log_score: float


@dataclass(frozen=True)
class NBestRecord:
    utt: str
    nbest: list[ScoredText]
    pinyin: str = ""  # space-separated toneless syllables

    def to_dict(self) -> dict:
        return {
            "utt": self.utt,
            "nbest": [{"text": h.text, "log_score": h.log_score} for h in self.nbest],
            "pinyin": self.pinyin,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "NBestRecord":
        return cls(
            utt=str(d["utt"]),
            nbest=[ScoredText(h["text"], float(h["log_score"])) for h in d["nbest"]],
            pinyin=d.get("pinyin", ""),
        )


@dataclass(frozen=True)
class RefinedRecord:
    utt: str
    text: str
    log_score: float | None
    source: str  # "ngram" | "chat" | "fallback"
    error: str | None = field(default=None, compare=False)

    def to_dict(self) -> dict:
        return {"utt": self.utt, "text": self.text, "log_score": self.log_score, "source": self.source}

    @classmethod
    def from_dict(cls, d: dict) -> "RefinedRecord":
        return cls(d["utt"], d["text"], d.get("log_score"), d["source"])


def dumps(obj: dict) -> str:
    return json.dumps(obj, ensure_ascii=False, separators=(", ", ": "))


def write_jsonl(path: str | Path, rows: Iterable[dict]) -> int:
    n = 0
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for row in rows:
            fh.write(dumps(row) + "\n")
            n += 1
    return n


def read_jsonl(path: str | Path) -> Iterator[dict]:
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if line.strip():
                try:
                    yield json.loads(line)
                except json.JSONDecodeError as exc:
                    raise ValueError(f"{path}:{lineno}: {exc}") from None


def read_nbest(path: str | Path) -> list[NBestRecord]:
    return [NBestRecord.from_dict(d) for d in read_jsonl(path)]


def read_refs(path: str | Path) -> list[tuple[str, str]]:
    """``utt<TAB>text`` lines."""
    refs = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line.strip() or line.startswith("#"):
                continue
            utt, sep, text = line.partition("\t")
            if not sep:
                raise ValueError(f"{path}:{lineno}: expected utt<TAB>text")
            refs.append((utt, text.strip()))
    return refs
