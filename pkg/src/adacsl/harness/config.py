"""Experiment configuration: dataclasses, file loading and the manifest."""

from __future__ import annotations

import dataclasses
import json
import platform
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional

import numpy as np
import yaml

from ..adaptive import AdaCslConfig
from ..core import CostMatrix
from ..costmodel import ThresholdCandidates
from ..errors import ConfigError
from ..nnet import TrainConfig
from .data import SyntheticSpec

METHODS = ("standard", "ta", "wce", "resample", "smote", "adacsl")


@dataclass(frozen=True)
class AdaptiveSettings:
    """The cost-independent part of an AdaCslConfig; costs come from each setup."""

    t_prime: float = 0.5
    num_bins: int = 1
    candidate_step: float = 0.01
    epsilon: float = 0.01
    max_epochs: int = 40
    min_epochs: int = 10

    def build(self, cm: CostMatrix, train_cfg: TrainConfig) -> AdaCslConfig:
        return AdaCslConfig(
            cm=cm,
            t_prime=self.t_prime,
            num_bins=self.num_bins,
            candidates=ThresholdCandidates.grid(self.candidate_step),
            epsilon=self.epsilon,
            max_epochs=self.max_epochs,
            min_epochs=self.min_epochs,
            train_cfg=train_cfg,
        )


@dataclass(frozen=True)
class TrainSettings:
    learning_rate: float = 1.0
    batch_size: int = 128
    weight_decay: float = 0.001
    hidden: tuple = (32,)
    activation: str = "relu"

    def build(self, max_epochs: int, seed: int) -> TrainConfig:
        return TrainConfig(
            learning_rate=self.learning_rate,
            batch_size=self.batch_size,
            weight_decay=self.weight_decay,
            max_epochs=max_epochs,
            seed=seed,
            hidden=tuple(self.hidden),
            activation=self.activation,
        )


@dataclass(frozen=True)
class ExperimentConfig:
    synthetic: Optional[SyntheticSpec] = field(default_factory=SyntheticSpec)
    csv: Optional[str] = None
    split: tuple = (0.6, 0.2, 0.2)
    rhos: tuple = ()
    # used when rhos is empty: rho = multiplier * |D-|/|D+| of the training split
    rho_multipliers: tuple = (1.0, 3.0, 5.0)
    methods: tuple = METHODS
    seeds: tuple = (0,)
    adacsl: AdaptiveSettings = field(default_factory=AdaptiveSettings)
    train: TrainSettings = field(default_factory=TrainSettings)
    smote_k: int = 5
    smote_ratio: float = 1.0
    subgroup_bins: int = 10
    output_dir: str = "results"
    svg: bool = False

    def __post_init__(self):
        if (self.synthetic is None) == (self.csv is None):
            raise ConfigError("exactly one of 'synthetic' and 'csv' must be given")
        split = tuple(float(v) for v in self.split)
        if len(split) != 3 or min(split) <= 0 or abs(sum(split) - 1.0) > 1e-9:
            raise ConfigError(f"split fractions must be three positives summing to 1, got {self.split}")
        rhos = tuple(float(r) for r in self.rhos)
        mults = tuple(float(r) for r in self.rho_multipliers)
        if any(r <= 0 for r in rhos + mults):
            raise ConfigError("rho values must be positive")
        if not rhos and not mults:
            raise ConfigError("give rhos or rho_multipliers")
        methods = tuple(self.methods)
        unknown = [m for m in methods if m not in METHODS]
        if unknown or not methods:
            raise ConfigError(f"methods must be a non-empty subset of {METHODS}, got {methods}")
        seeds = tuple(int(s) for s in self.seeds)
        if not seeds:
            raise ConfigError("at least one seed is required")
        object.__setattr__(self, "split", split)
        object.__setattr__(self, "rhos", rhos)
        object.__setattr__(self, "rho_multipliers", mults)
        object.__setattr__(self, "methods", methods)
        object.__setattr__(self, "seeds", seeds)


_NESTED = {"synthetic": SyntheticSpec, "adacsl": AdaptiveSettings, "train": TrainSettings}


def _build(cls, data: dict, where: str):
    if not isinstance(data, dict):
        raise ConfigError(f"{where}: expected a mapping")
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = sorted(set(data) - names)
    if unknown:
        raise ConfigError(f"{where}: unknown keys {unknown}")
    kwargs = {}
    for k, v in data.items():
        if k in _NESTED and cls is ExperimentConfig:
            kwargs[k] = None if v is None else _build(_NESTED[k], v, f"{where}.{k}")
        elif isinstance(v, list):
            kwargs[k] = tuple(v)
        else:
            kwargs[k] = v
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{where}: {exc}") from exc


def config_from_dict(data: dict) -> ExperimentConfig:
    data = dict(data)
    if "csv" in data and "synthetic" not in data:
        data["synthetic"] = None
    return _build(ExperimentConfig, data, "config")


def load_config(path) -> ExperimentConfig:
    """Load a YAML (or JSON) config file; unknown keys are rejected."""
    text = Path(path).read_text(encoding="utf-8")
    try:
        data = yaml.safe_load(text) or {}
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    return config_from_dict(data)


def config_to_dict(cfg: ExperimentConfig) -> dict:
    def conv(v):
        if dataclasses.is_dataclass(v):
            return {f.name: conv(getattr(v, f.name)) for f in dataclasses.fields(v)}
        if isinstance(v, tuple):
            return [conv(x) for x in v]
        return v

    return conv(cfg)


def manifest_lines(cfg: ExperimentConfig, extra: Optional[dict] = None) -> list[str]:
    """Flat ``key = value`` lines for every resolved setting (no timestamps)."""
    from .. import __version__

    flat: dict[str, Any] = {}

    def walk(prefix, v):
        if isinstance(v, dict):
            for k in v:
                walk(f"{prefix}.{k}" if prefix else k, v[k])
        else:
            flat[prefix] = v

    walk("", config_to_dict(cfg))
    walk("", extra or {})
    flat["version.adacsl"] = __version__
    flat["version.numpy"] = np.__version__
    flat["version.python"] = platform.python_version()
    return [f"{k} = {json.dumps(flat[k])}" for k in sorted(flat)]
