"""Run configuration: nested dataclasses with a strict JSON/YAML round trip.

Schema (every key optional except ``data.kind``)::

    seed: int                       # init, batch order and noise streams
    epochs: int
    batch_size: int                 # >= 2
    stratified: bool                # class-interleaved batches
    eval_split: target | test       # evaluate on training data or a held-out split
    data:
      kind: blobs | moons | idx | csv
      params: {...}                 # generator arguments or file paths, see load_data
      standardize: bool
      test_fraction: float          # carve a test split from generated/CSV data
    network: {hidden_dims: [int], activation: relu | tanh, k_out: int}
    loss:    {kind: ccl | kcl, margin: float, weighting: mean | balanced}
    optim:   {kind: auto | sgd | adam, lr: float | null, momentum: float,
              milestones: [int], gamma: float, clip_norm: float | null}
    noise:   {false_positive_rate: float, false_negative_rate: float}
"""

from __future__ import annotations

import copy
import dataclasses
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import yaml

from ..errors import ConfigError
from ..loss import DEFAULT_MARGIN, LossKind, PairWeighting
from ..network import Activation

DATA_KINDS = ("blobs", "moons", "idx", "csv")
EVAL_SPLITS = ("target", "test")
ADAM_K_OUT_THRESHOLD = 50


@dataclass
class DataConfig:
    kind: str = "blobs"
    params: dict = field(default_factory=dict)
    standardize: bool = False
    test_fraction: float = 0.0


@dataclass
class NetworkConfig:
    hidden_dims: list = field(default_factory=lambda: [64, 64])
    activation: str = "relu"
    k_out: int = 10


@dataclass
class LossConfig:
    kind: str = "ccl"
    margin: float = DEFAULT_MARGIN
    weighting: str = "mean"


@dataclass
class OptimConfig:
    kind: str = "auto"
    lr: float | None = None
    momentum: float = 0.0
    milestones: list = field(default_factory=list)
    gamma: float = 0.1
    clip_norm: float | None = None


@dataclass
class NoiseConfig:
    false_positive_rate: float = 0.0
    false_negative_rate: float = 0.0


@dataclass
class RunConfig:
    data: DataConfig = field(default_factory=DataConfig)
    network: NetworkConfig = field(default_factory=NetworkConfig)
    loss: LossConfig = field(default_factory=LossConfig)
    optim: OptimConfig = field(default_factory=OptimConfig)
    noise: NoiseConfig = field(default_factory=NoiseConfig)
    epochs: int = 30
    batch_size: int = 100
    stratified: bool = False
    eval_split: str = "target"
    seed: int = 0

    def validate(self) -> "RunConfig":
        if self.data.kind not in DATA_KINDS:
            raise ConfigError(f"data.kind must be one of {DATA_KINDS}, got {self.data.kind!r}")
        if self.eval_split not in EVAL_SPLITS:
            raise ConfigError(f"eval_split must be one of {EVAL_SPLITS}, got {self.eval_split!r}")
        if self.batch_size < 2:
            raise ConfigError(f"batch_size must be >= 2, got {self.batch_size}")
        if self.epochs < 0:
            raise ConfigError(f"epochs must be >= 0, got {self.epochs}")
        if self.network.k_out < 2:
            raise ConfigError(f"network.k_out must be >= 2, got {self.network.k_out}")
        if any(int(h) < 1 for h in self.network.hidden_dims):
            raise ConfigError(f"hidden dims must be positive: {self.network.hidden_dims}")
        try:
            Activation(self.network.activation)
            PairWeighting(self.loss.weighting)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        LossKind.coerce(self.loss.kind)
        if not self.loss.margin > 0:
            raise ConfigError(f"loss.margin must be positive, got {self.loss.margin}")
        if self.optim.kind not in ("auto", "sgd", "adam"):
            raise ConfigError(f"optim.kind must be auto, sgd or adam, got {self.optim.kind!r}")
        if self.optim.lr is not None and not self.optim.lr > 0:
            raise ConfigError(f"optim.lr must be positive, got {self.optim.lr}")
        if self.optim.clip_norm is not None and not self.optim.clip_norm > 0:
            raise ConfigError(f"optim.clip_norm must be positive, got {self.optim.clip_norm}")
        for name in ("false_positive_rate", "false_negative_rate"):
            v = getattr(self.noise, name)
            if not 0.0 <= v <= 1.0:
                raise ConfigError(f"noise.{name} must lie in [0, 1], got {v}")
        if not 0.0 <= self.data.test_fraction < 1.0:
            raise ConfigError(f"data.test_fraction must lie in [0, 1), got {self.data.test_fraction}")
        return self

    # resolved optimizer choice: Adam for many-cluster heads, SGD otherwise
    def optimizer_kind(self) -> str:
        if self.optim.kind != "auto":
            return self.optim.kind
        return "adam" if self.network.k_out >= ADAM_K_OUT_THRESHOLD else "sgd"

    def learning_rate(self) -> float:
        if self.optim.lr is not None:
            return float(self.optim.lr)
        return 0.001 if self.optimizer_kind() == "adam" else 0.1

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def fingerprint(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()

    def copy(self) -> "RunConfig":
        return copy.deepcopy(self)


_SECTIONS = {
    "data": DataConfig,
    "network": NetworkConfig,
    "loss": LossConfig,
    "optim": OptimConfig,
    "noise": NoiseConfig,
}


def _build(cls, raw, where):
    if not isinstance(raw, dict):
        raise ConfigError(f"{where} must be a mapping, got {type(raw).__name__}")
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = set(raw) - names
    if unknown:
        raise ConfigError(f"unknown key(s) in {where}: {sorted(unknown)}")
    return cls(**raw)


def config_from_dict(raw: dict) -> RunConfig:
    if not isinstance(raw, dict):
        raise ConfigError("run config must be a mapping")
    raw = copy.deepcopy(raw)
    kwargs = {}
    for key, value in raw.items():
        if key in _SECTIONS:
            kwargs[key] = _build(_SECTIONS[key], value, key)
        else:
            kwargs[key] = value
    cfg = _build(RunConfig, kwargs, "run config")
    return cfg.validate()


def read_structured(path) -> dict:
    path = Path(path)
    text = path.read_text()
    try:
        if path.suffix.lower() in (".yaml", ".yml"):
            raw = yaml.safe_load(text)
        else:
            raw = json.loads(text)
    except (json.JSONDecodeError, yaml.YAMLError) as exc:
        raise ConfigError(f"{path}: cannot parse: {exc}") from None
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: top level must be a mapping")
    return raw


def load_config(path) -> RunConfig:
    return config_from_dict(read_structured(path))


def save_config(cfg: RunConfig, path) -> None:
    Path(path).write_text(json.dumps(cfg.to_dict(), indent=2, sort_keys=True) + "\n")


def config_diff(a: RunConfig, b: RunConfig) -> dict:
    """Leaf keys (dotted) whose values differ, mapped to ``(a_value, b_value)``."""

    def flatten(d, prefix=""):
        out = {}
        for k, v in d.items():
            key = f"{prefix}{k}"
            if isinstance(v, dict) and k != "params":
                out.update(flatten(v, key + "."))
            else:
                out[key] = v
        return out

    fa, fb = flatten(a.to_dict()), flatten(b.to_dict())
    return {k: (fa.get(k), fb.get(k)) for k in sorted(set(fa) | set(fb)) if fa.get(k) != fb.get(k)}
