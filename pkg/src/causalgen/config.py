"""Run configuration: YAML file loading, validation, environment overrides.

A config file is a single YAML mapping with up to five sections (``model``,
``train``, ``data``, ``eval``, ``simulate``) plus a top-level ``output_dir``.
Every field has a default, so an empty file is a valid config.  Two
environment variables override the file: ``CAUSALGEN_SEED`` replaces every
seed field and ``CAUSALGEN_OUT`` replaces the output directory.
"""

from __future__ import annotations

import dataclasses
import os
from dataclasses import dataclass, field, fields

import yaml

from .paths import SCHEME_AFFINE_TO_BALL, SCHEME_DIVIDE_BY_START, SCHEME_NONE
from .simulate import BSParams, HestonParams, PDV4Params

ENV_SEED = "CAUSALGEN_SEED"
ENV_OUT = "CAUSALGEN_OUT"

SIMULATOR_PARAMS = {"bs": BSParams, "heston": HestonParams, "pdv4": PDV4Params}
NORMALIZATION_SCHEMES = (SCHEME_NONE, SCHEME_DIVIDE_BY_START, SCHEME_AFFINE_TO_BALL)
METRIC_NAMES = ("swd", "mmd", "sigmmd", "saw")
DATA_KINDS = ("paths", "series")


@dataclass
class ModelSection:
    d: int = 1
    n_steps: int = 61
    d_z: int = 1
    hidden: int = 32
    flow_layers: int = 6
    flow_hidden: int = 64
    scale_cap: float = 3.0
    beta: float = 0.5
    seed: int = 0
    conditional: bool = False
    embed_dim: int = 32
    cond_truncation: int = 50
    cond_alpha: float = 1.5
    cond_delta: float = 1.0

    def validate(self) -> None:
        if min(self.d, self.n_steps, self.d_z, self.hidden, self.flow_hidden,
               self.embed_dim, self.cond_truncation) < 1:
            raise ValueError("model dimensions must be >= 1")
        if self.flow_layers < 0:
            raise ValueError(f"flow_layers must be >= 0, got {self.flow_layers}")
        if self.beta < 0:
            raise ValueError(f"beta must be >= 0, got {self.beta}")
        if self.scale_cap <= 0:
            raise ValueError(f"scale_cap must be > 0, got {self.scale_cap}")


@dataclass
class TrainSection:
    lr: float = 1e-3
    epochs: int = 200
    batch: int = 128
    seed: int = 0
    anneal_frac: float = 0.1

    def validate(self) -> None:
        if self.lr <= 0:
            raise ValueError(f"lr must be > 0, got {self.lr}")
        if self.epochs < 1 or self.batch < 1:
            raise ValueError("epochs and batch must be >= 1")
        if not 0.0 <= self.anneal_frac <= 1.0:
            raise ValueError(f"anneal_frac must lie in [0, 1], got {self.anneal_frac}")


@dataclass
class DataSection:
    source: str | None = None
    kind: str = "paths"
    column: str | None = None
    normalization: str = SCHEME_AFFINE_TO_BALL
    window: int = 61
    stride: int = 1
    dt: float = 1.0 / 12.0

    def validate(self, check_files: bool = False) -> None:
        if self.kind not in DATA_KINDS:
            raise ValueError(f"data kind must be one of {DATA_KINDS}, got {self.kind!r}")
        if self.normalization not in NORMALIZATION_SCHEMES:
            raise ValueError(
                f"normalization must be one of {NORMALIZATION_SCHEMES}, "
                f"got {self.normalization!r}")
        if self.window < 1 or self.stride < 1:
            raise ValueError("window and stride must be >= 1")
        if self.dt <= 0:
            raise ValueError(f"dt must be > 0, got {self.dt}")
        if check_files:
            if self.source is None:
                raise ValueError("data source is required for this command")
            if not os.path.exists(self.source):
                raise FileNotFoundError(f"data source not found: {self.source}")


@dataclass
class EvalSection:
    metrics: tuple = METRIC_NAMES
    n_proj: int = 100
    sig_level: int = 4
    saw_len: int = 5
    saw_slices: int = 100
    saw_samples: int = 500
    seed: int = 0
    max_lag: int = 20

    def __post_init__(self):
        if isinstance(self.metrics, str):
            self.metrics = tuple(s.strip() for s in self.metrics.split(",") if s.strip())
        else:
            self.metrics = tuple(self.metrics)

    def validate(self) -> None:
        unknown = [m for m in self.metrics if m not in METRIC_NAMES]
        if unknown:
            raise ValueError(f"unknown metrics {unknown}; choose from {METRIC_NAMES}")
        if not self.metrics:
            raise ValueError("at least one metric is required")
        if min(self.n_proj, self.sig_level, self.saw_len, self.saw_slices,
               self.saw_samples, self.max_lag) < 1:
            raise ValueError("all eval sizes must be >= 1")


@dataclass
class SimulateSection:
    model: str = "bs"
    n: int = 1000
    seed: int = 0
    params: dict = field(default_factory=dict)

    def validate(self) -> None:
        if self.model not in SIMULATOR_PARAMS:
            raise ValueError(
                f"unknown simulator {self.model!r}; choose from "
                f"{tuple(SIMULATOR_PARAMS)}")
        if self.n < 1:
            raise ValueError(f"n must be >= 1, got {self.n}")
        self.build_params()

    def build_params(self):
        """Instantiate the parameter dataclass for the chosen simulator."""
        if self.model not in SIMULATOR_PARAMS:
            raise ValueError(
                f"unknown simulator {self.model!r}; choose from "
                f"{tuple(SIMULATOR_PARAMS)}")
        cls = SIMULATOR_PARAMS[self.model]
        known = {f.name for f in fields(cls)}
        unknown = set(self.params) - known
        if unknown:
            raise ValueError(
                f"unknown {self.model} parameters {sorted(unknown)}; "
                f"known: {sorted(known)}")
        p = cls(**self.params)
        p.validate()
        return p


def _coerce(value, type_name: str, where: str):
    """Coerce YAML scalars to the declared field type.

    YAML 1.1 floats need a signed exponent, so '1e150' arrives as a string;
    accept numeric strings rather than surface a confusing type error."""
    try:
        if type_name == "int" and not isinstance(value, bool):
            return int(value)
        if type_name == "float":
            return float(value)
    except (TypeError, ValueError):
        raise ValueError(f"{where} must be a number, got {value!r}") from None
    return value


def _section_from_dict(cls, raw: dict, name: str):
    by_name = {f.name: f for f in fields(cls)}
    unknown = set(raw) - set(by_name)
    if unknown:
        raise ValueError(
            f"unknown keys {sorted(unknown)} in section {name!r}; "
            f"known: {sorted(by_name)}")
    coerced = {k: _coerce(v, by_name[k].type, f"{name}.{k}")
               for k, v in raw.items()}
    return cls(**coerced)


@dataclass
class Config:
    model: ModelSection = field(default_factory=ModelSection)
    train: TrainSection = field(default_factory=TrainSection)
    data: DataSection = field(default_factory=DataSection)
    eval: EvalSection = field(default_factory=EvalSection)
    simulate: SimulateSection = field(default_factory=SimulateSection)
    output_dir: str = "out"

    _SECTIONS = {
        "model": ModelSection,
        "train": TrainSection,
        "data": DataSection,
        "eval": EvalSection,
        "simulate": SimulateSection,
    }

    @classmethod
    def from_dict(cls, raw: dict | None) -> "Config":
        raw = dict(raw or {})
        out_dir = raw.pop("output_dir", "out")
        unknown = set(raw) - set(cls._SECTIONS)
        if unknown:
            raise ValueError(
                f"unknown top-level keys {sorted(unknown)}; "
                f"known: {sorted(cls._SECTIONS)} plus 'output_dir'")
        sections = {}
        for name, sec_cls in cls._SECTIONS.items():
            sec_raw = raw.get(name) or {}
            if not isinstance(sec_raw, dict):
                raise ValueError(f"section {name!r} must be a mapping")
            sections[name] = _section_from_dict(sec_cls, sec_raw, name)
        return cls(output_dir=str(out_dir), **sections)

    def validate(self, check_files: bool = False) -> "Config":
        self.model.validate()
        self.train.validate()
        self.data.validate(check_files=check_files)
        self.eval.validate()
        self.simulate.validate()
        return self

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["eval"]["metrics"] = list(self.eval.metrics)
        return d


def apply_env_overrides(cfg: Config, env=None) -> Config:
    env = os.environ if env is None else env
    if ENV_SEED in env:
        try:
            seed = int(env[ENV_SEED])
        except ValueError:
            raise ValueError(f"{ENV_SEED} must be an integer, got {env[ENV_SEED]!r}")
        cfg.model.seed = seed
        cfg.train.seed = seed
        cfg.eval.seed = seed
        cfg.simulate.seed = seed
    if ENV_OUT in env:
        cfg.output_dir = env[ENV_OUT]
    return cfg


def load_config(path, env=None) -> Config:
    """Load, override from the environment, and range-check a YAML config."""
    with open(path, encoding="utf-8") as fh:
        raw = yaml.safe_load(fh)
    if raw is not None and not isinstance(raw, dict):
        raise ValueError(f"config root must be a mapping, got {type(raw).__name__}")
    cfg = Config.from_dict(raw)
    apply_env_overrides(cfg, env=env)
    return cfg.validate()


__all__ = [
    "Config", "ModelSection", "TrainSection", "DataSection", "EvalSection",
    "SimulateSection", "load_config", "apply_env_overrides",
    "ENV_SEED", "ENV_OUT", "METRIC_NAMES", "SIMULATOR_PARAMS",
]
