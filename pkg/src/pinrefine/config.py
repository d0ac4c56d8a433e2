"""Run configuration: defaults < JSON config file < command-line flags."""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, fields, is_dataclass
from pathlib import Path
from typing import Any


@dataclass
class Paths:
    inventory: str | None = None  # None -> shipped 397-syllable list
    dictionary: str | None = None  # None -> shipped homophone table
    char_vocab: str | None = None
    pinyin_vocab: str | None = None
    corpus: str | None = None
    lm: str | None = None
    posteriors: str | None = None


@dataclass
class DecodeParams:
    beam_width: int = 16
    k: int = 5
    top_n: int | None = None


@dataclass
class SynthParams:
    frames_per_token: int = 2
    blank_gap: int = 1
    noise: float = 0.0


@dataclass
class RefineParams:
    w_lm: float = 1.0
    w_ac: float = 0.5
    w_py: float = 1.0
    beam: int = 16
    expansion_cap: int = 8
    floor_weight: float = math.log(0.01)
    pooling: str = "logsum"
    scale_expansions: bool = True
    include_scores: bool = False


@dataclass
class LMParams:
    order: int = 3
    k: float = 0.1


@dataclass
class CorruptionParams:
    sources: list[dict] = field(
        default_factory=lambda: [
            {"name": "early", "cer_target": 0.5},
            {"name": "middle", "cer_target": 0.3},
            {"name": "late", "cer_target": 0.1},
        ]
    )
    nbest: int = 3
    pinyin_cer: float = 0.0
    homophone_prob: float = 0.7
    p_sub: float = 0.8
    p_del: float = 0.1
    p_ins: float = 0.1


@dataclass
class EndpointParams:
    url: str | None = None
    model: str | None = None
    api_key_env: str = "OPENAI_API_KEY"  # the token itself never appears in config or flags
    timeout: float = 30.0
    max_retries: int = 1
    max_concurrency: int = 8


@dataclass
class RunConfig:
    paths: Paths = field(default_factory=Paths)
    decode: DecodeParams = field(default_factory=DecodeParams)
    synth: SynthParams = field(default_factory=SynthParams)
    refine: RefineParams = field(default_factory=RefineParams)
    lm: LMParams = field(default_factory=LMParams)
    corruption: CorruptionParams = field(default_factory=CorruptionParams)
    endpoint: EndpointParams = field(default_factory=EndpointParams)
    seed: int = 0
    jobs: int = 1

    def to_dict(self) -> dict:
        return asdict(self)

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8")

    def validate(self) -> None:
        for f in fields(self.paths):
            p = getattr(self.paths, f.name)
            if p is not None and not Path(p).exists():
                raise FileNotFoundError(f"configured {f.name} path does not exist: {p}")
        if self.jobs < 1:
            raise ValueError("jobs must be >= 1")


def _merge(obj: Any, data: dict, where: str) -> None:
    known = {f.name: f for f in fields(obj)}
    for key, value in data.items():
        if key not in known:
            raise ValueError(f"unknown config key {where}{key}")
        current = getattr(obj, key)
        if is_dataclass(current):
            if not isinstance(value, dict):
                raise ValueError(f"config key {where}{key} must be an object")
            _merge(current, value, f"{where}{key}.")
        else:
            setattr(obj, key, value)


def load_config(path: str | Path | None = None, overrides: dict[str, Any] | None = None) -> RunConfig:
    """Build a config from defaults, an optional JSON file, then dotted overrides.

    ``overrides`` maps ``"section.key"`` (or a top-level key) to a value;
    ``None`` values are ignored so unset CLI flags fall through.
    """
    cfg = RunConfig()
    if path is not None:
        _merge(cfg, json.loads(Path(path).read_text(encoding="utf-8")), "")
    for dotted, value in (overrides or {}).items():
        if value is None:
            continue
        *parents, leaf = dotted.split(".")
        target: Any = cfg
        for p in parents:
            target = getattr(target, p)
        if not hasattr(target, leaf):
            raise ValueError(f"unknown config key {dotted}")
        setattr(target, leaf, value)
    return cfg
