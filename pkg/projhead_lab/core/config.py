"""Experiment configuration.

A config file is one JSON object. Keys may be nested objects or flat dotted
paths (`"schedule.inner_steps": 5`); both forms are unflattened before
validation. Every section forbids unknown keys.
"""

import json
from hashlib import sha256
from typing import Literal
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator
from ..constants import CIFAR_PIXELS
from ..data.augment import AugConfig
from ..data.synthetic import SynthConfig
from ..errors import ConfigError
from ..evaluation.components import EvalConfig
from ..models.heads import HeadKind
from ..training.schedule import REGIMES, Regime, TrainSchedule


class DatasetConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    kind: Literal["synthetic", "cifar10", "cifar100", "exported"] = "synthetic"
    synthetic: SynthConfig = Field(default_factory=SynthConfig)
    train_paths: list[str] = Field(default_factory=list)
    test_paths: list[str] = Field(default_factory=list)
    cifar100_label: Literal["fine", "coarse"] = "fine"
    test_fraction: float = Field(0.2, gt=0.0, lt=1.0)
    split_seed: int = 0
    limit: int | None = Field(None, ge=2)

    @model_validator(mode="after")
    def _check_paths(self):
        if self.kind != "synthetic" and not self.train_paths:
            raise ValueError(f"dataset kind {self.kind} needs train_paths")
        return self


class ModelConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    hidden_sizes: list[int] = Field(default_factory=lambda: [256, 128])
    m: int = Field(64, ge=1)
    head: HeadKind = HeadKind.NONLINEAR
    d: int = Field(16, ge=1)
    head_hidden: int | None = Field(48, ge=1)
    pretrained_checkpoint: str | None = None


class OutputConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    dir: str | None = None  # None: <output_root>/<name>
    checkpoint_every: int = Field(0, ge=0)
    feature_epochs: list[int] = Field(default_factory=list)


class ExperimentConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    name: str = "desk"
    dataset: DatasetConfig = Field(default_factory=DatasetConfig)
    augment: AugConfig = Field(default_factory=AugConfig)
    model: ModelConfig = Field(default_factory=ModelConfig)
    schedule: TrainSchedule = Field(default_factory=TrainSchedule)
    eval: EvalConfig = Field(default_factory=EvalConfig)
    seeds: list[int] = Field(default_factory=lambda: [0], min_length=1)
    output: OutputConfig = Field(default_factory=OutputConfig)

    @property
    def input_dim(self) -> int:
        if self.dataset.kind == "synthetic":
            return self.dataset.synthetic.dim
        if self.dataset.kind in ("cifar10", "cifar100"):
            return CIFAR_PIXELS
        return -1  # exported: known once loaded

    def encoder_sizes(self, input_dim: int | None = None) -> list[int]:
        p = self.input_dim if input_dim is None else input_dim
        return [p, *self.model.hidden_sizes, self.model.m]

    @model_validator(mode="after")
    def _cross_field(self):
        model, schedule = self.model, self.schedule
        if model.head != HeadKind.NONE and model.d > model.m:
            raise ValueError(f"model.d={model.d} exceeds model.m={model.m}")
        if model.head == HeadKind.NONLINEAR and model.head_hidden is None:
            raise ValueError("a nonlinear head needs model.head_hidden")
        split = {"h_r", "h_n"} & set(self.eval.components)
        if model.head == HeadKind.NONLINEAR and split and model.head_hidden > model.m:
            raise ValueError(
                f"model.head_hidden={model.head_hidden} exceeds model.m={model.m}, so h has no "
                f"range/null split; drop {', '.join(sorted(split))} from eval.components"
            )
        if model.head == HeadKind.FIXED_PRETRAINED and not model.pretrained_checkpoint:
            raise ValueError("a fixed_pretrained head needs model.pretrained_checkpoint")
        allowed = REGIMES.get(schedule.regime).head_kinds
        if model.head not in allowed:
            names = ", ".join(sorted(allowed))
            raise ValueError(
                f"schedule.regime={schedule.regime} cannot train a {model.head} head (allowed: {names})"
            )
        image = self.dataset.kind in ("cifar10", "cifar100")
        if image and self.augment.kind != "image":
            raise ValueError(f"{self.dataset.kind} data needs augment.kind=image")
        if self.dataset.kind == "synthetic" and self.augment.kind != "synthetic":
            raise ValueError("synthetic data needs augment.kind=synthetic")
        if schedule.regime == Regime.PCA_REFRESH and schedule.pca_subset <= model.m:
            raise ValueError(
                f"schedule.pca_subset={schedule.pca_subset} must exceed model.m={model.m}"
            )
        return self


def unflatten(raw: dict) -> dict:
    """Expand dotted keys into nested dicts; nested dicts are expanded recursively."""
    out: dict = {}
    for key, value in raw.items():
        if isinstance(value, dict):
            value = unflatten(value)
        parts = key.split(".")
        node = out
        for part in parts[:-1]:
            existing = node.setdefault(part, {})
            if not isinstance(existing, dict):
                raise ConfigError(f"config key {key!r} conflicts with a scalar at {part!r}")
            node = existing
        leaf = parts[-1]
        if leaf in node and isinstance(node[leaf], dict) and isinstance(value, dict):
            node[leaf] = _merge(node[leaf], value, key)
        elif leaf in node:
            raise ConfigError(f"config key {key!r} is given twice")
        else:
            node[leaf] = value
    return out


def _merge(a: dict, b: dict, where: str) -> dict:
    merged = dict(a)
    for k, v in b.items():
        if k in merged and isinstance(merged[k], dict) and isinstance(v, dict):
            merged[k] = _merge(merged[k], v, f"{where}.{k}")
        elif k in merged:
            raise ConfigError(f"config key {where}.{k} is given twice")
        else:
            merged[k] = v
    return merged


def _describe(error: ValidationError) -> str:
    lines = []
    for item in error.errors():
        where = ".".join(str(p) for p in item["loc"]) or "<root>"
        lines.append(f"{where}: {item['msg']}")
    return "; ".join(lines)


def parse_config(raw: dict) -> ExperimentConfig:
    try:
        return ExperimentConfig.model_validate(unflatten(raw))
    except ValidationError as e:
        raise ConfigError(f"invalid config: {_describe(e)}") from e


def load_config(path: str) -> ExperimentConfig:
    try:
        with open(path) as f:
            raw = json.load(f)
    except FileNotFoundError as e:
        raise ConfigError(f"config file {path} does not exist") from e
    except json.JSONDecodeError as e:
        raise ConfigError(f"config file {path} is not valid JSON: {e}") from e
    if not isinstance(raw, dict):
        raise ConfigError(f"config file {path} must hold a JSON object")
    return parse_config(raw)


def with_overrides(config: ExperimentConfig, overrides: dict) -> ExperimentConfig:
    """A re-validated copy with dotted-key overrides applied."""
    base = config.model_dump(mode="json")
    for key, value in unflatten(overrides).items():
        base[key] = _overlay(base.get(key), value)
    return parse_config(base)


def _overlay(base, value):
    if isinstance(base, dict) and isinstance(value, dict):
        out = dict(base)
        for k, v in value.items():
            out[k] = _overlay(out.get(k), v)
        return out
    return value


def config_hash(config: ExperimentConfig) -> str:
    canonical = json.dumps(config.model_dump(mode="json"), sort_keys=True, separators=(",", ":"))
    return sha256(canonical.encode()).hexdigest()
