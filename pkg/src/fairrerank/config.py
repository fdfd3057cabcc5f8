"""Experiment configuration: one JSON document, unknown keys rejected."""

from __future__ import annotations

import dataclasses
import hashlib
import json
import os
from dataclasses import dataclass, field
from typing import Any

from .baselines import MFHyper
from .errors import ConfigError
from .metrics import MetricWeights
from .reranker import PRESETS, TARGETS


@dataclass
class DatasetConfig:
    path: str = ""
    name: str = "dataset"
    format: str = "tsv"
    implicit: bool = False


@dataclass
class SplitConfig:
    ratios: tuple[float, float, float] = (0.8, 0.1, 0.1)
    seed: int = 0


@dataclass
class RerankerConfig:
    presets: list[str] = field(default_factory=lambda: list(PRESETS))
    # explicit gamma replaces the preset list
    gamma: float | None = None
    # JSON key is "lambda"
    lam: float = 0.1
    target: str = "eq"
    p_f: tuple[float, float] | None = None

    def p_target(self) -> tuple[float, float]:
        if self.target == "custom":
            if self.p_f is None:
                raise ConfigError("target 'custom' needs reranker.p_f")
            return tuple(self.p_f)
        return TARGETS[self.target]


@dataclass
class SweepConfig:
    lambdas: list[float] = field(default_factory=lambda: [0.0, 0.05, 0.1, 0.5, 1.0])
    gammas: list[float] = field(default_factory=lambda: [0.0, 0.1, 0.33, 1.0])


@dataclass
class ExperimentConfig:
    dataset: DatasetConfig = field(default_factory=DatasetConfig)
    k_core: int = 10
    split: SplitConfig = field(default_factory=SplitConfig)
    head_fraction: float = 0.2
    top_n: int = 50
    k: int = 10
    model: str = "mostpop"
    mf: MFHyper = field(default_factory=MFHyper)
    reranker: RerankerConfig = field(default_factory=RerankerConfig)
    weights: MetricWeights = field(default_factory=MetricWeights)
    sweep: SweepConfig = field(default_factory=SweepConfig)
    workers: int = 1
    output_dir: str = "out"

    def validate(self) -> None:
        if self.k_core < 1:
            raise ConfigError("k_core must be >= 1")
        if not 0 < self.head_fraction < 1:
            raise ConfigError("head_fraction must lie in (0, 1)")
        if self.k < 1 or self.top_n < self.k:
            raise ConfigError("need 1 <= k <= top_n")
        if self.dataset.format not in ("tsv", "csv"):
            raise ConfigError("dataset.format must be 'tsv' or 'csv'")
        r = self.reranker
        if r.target not in (*TARGETS, "custom"):
            raise ConfigError(f"reranker.target must be one of {[*TARGETS, 'custom']}")
        unknown = [p for p in r.presets if p not in PRESETS]
        if unknown:
            raise ConfigError(f"unknown presets {unknown}; choose from {list(PRESETS)}")
        r.p_target()

    def digest(self) -> str:
        # location-independent: two checkouts of one experiment hash the same
        d = to_dict(self)
        d.pop("output_dir")
        d["dataset"]["path"] = os.path.basename(d["dataset"]["path"])
        return hashlib.sha256(canonical_json(d).encode()).hexdigest()


_RENAMES = {"lambda": "lam"}


def _build(cls, data: Any, where: str):
    if not dataclasses.is_dataclass(cls):
        return data
    if not isinstance(data, dict):
        raise ConfigError(f"{where or 'config'}: expected an object")
    fields = {f.name: f for f in dataclasses.fields(cls)}
    kwargs = {}
    for key, value in data.items():
        name = _RENAMES.get(key, key)
        if name not in fields:
            raise ConfigError(f"unknown config key {where + '.' if where else ''}{key}")
        sub = _NESTED.get((cls.__name__, name))
        kwargs[name] = _build(sub, value, f"{where}.{key}" if where else key) if sub else value
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as e:
        raise ConfigError(f"{where or 'config'}: {e}") from None


_NESTED = {
    ("ExperimentConfig", "dataset"): DatasetConfig,
    ("ExperimentConfig", "split"): SplitConfig,
    ("ExperimentConfig", "mf"): MFHyper,
    ("ExperimentConfig", "reranker"): RerankerConfig,
    ("ExperimentConfig", "weights"): MetricWeights,
    ("ExperimentConfig", "sweep"): SweepConfig,
}


def from_dict(data: dict, base_dir: str = ".") -> ExperimentConfig:
    cfg = _build(ExperimentConfig, data, "")
    cfg.split.ratios = tuple(float(x) for x in cfg.split.ratios)
    if cfg.dataset.path and not os.path.isabs(cfg.dataset.path):
        cfg.dataset.path = os.path.normpath(os.path.join(base_dir, cfg.dataset.path))
    if not os.path.isabs(cfg.output_dir):
        cfg.output_dir = os.path.normpath(os.path.join(base_dir, cfg.output_dir))
    cfg.validate()
    return cfg


def load_config(path: str) -> ExperimentConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file {path} not found") from None
    except json.JSONDecodeError as e:
        raise ConfigError(f"{path}: invalid JSON ({e})") from None
    return from_dict(data, os.path.dirname(os.path.abspath(path)))


def to_dict(cfg) -> dict:
    out = dataclasses.asdict(cfg)
    out["reranker"]["lambda"] = out["reranker"].pop("lam")
    return out


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2) + "\n"
