"""Run configuration: a JSON config file plus CLI overrides drive the whole
generate -> train -> evaluate -> simulate -> benchmark pipeline.

Every default matches the training recipe the toolkit targets (100 epochs,
batch 32, lr 3e-4, beta1 0.87, class weights 0.90/0.05, 7:2:1 split).
"""

import json
from dataclasses import dataclass, field, asdict
from typing import Optional, Tuple

from .flight import RocketModel
from .neuralnet import TrainConfig


class ConfigError(ValueError):
    """Validation failure; `field` is the dotted path of the offending key."""

    def __init__(self, field_path: str, msg: str):
        self.field_path = field_path
        super().__init__(f"{field_path}: {msg}")


@dataclass
class SimConfig:
    h: float = 0.01            # closed-loop integration step
    h_predict: float = 0.01    # oracle apogee-prediction step
    n_flights: int = 60
    alt0_range: Tuple[float, float] = (500.0, 1500.0)
    v0_range: Tuple[float, float] = (150.0, 300.0)
    sample_stride: int = 20    # keep the dataset near the ~4k-sample scale

    def __post_init__(self):
        if not (self.h > 0):
            raise ConfigError("sim.h", "must be > 0")
        if not (self.h_predict > 0):
            raise ConfigError("sim.h_predict", "must be > 0")
        if self.n_flights < 1:
            raise ConfigError("sim.n_flights", "must be >= 1")
        if self.sample_stride < 1:
            raise ConfigError("sim.sample_stride", "must be >= 1")
        for name, rng in (("alt0_range", self.alt0_range), ("v0_range", self.v0_range)):
            if len(rng) != 2 or rng[0] > rng[1]:
                raise ConfigError(f"sim.{name}", "must be (lo, hi) with lo <= hi")


@dataclass
class DatasetConfig:
    smote_k: int = 5
    use_smote: bool = True

    def __post_init__(self):
        if self.smote_k < 1:
            raise ConfigError("dataset.smote_k", "must be >= 1")


@dataclass
class PathsConfig:
    dataset: str = "dataset.csv"
    model: str = "model.json"
    reports: str = "."


@dataclass
class RunConfig:
    rocket: RocketModel = field(default_factory=RocketModel)
    sim: SimConfig = field(default_factory=SimConfig)
    dataset: DatasetConfig = field(default_factory=DatasetConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    paths: PathsConfig = field(default_factory=PathsConfig)
    seed: int = 42

    def __post_init__(self):
        if self.seed < 0:
            raise ConfigError("seed", "must be a non-negative integer")

    def to_dict(self) -> dict:
        return asdict(self)


def _build_section(cls, section: str, doc: dict, prefix: str):
    known = {f for f in cls.__dataclass_fields__}
    for key in doc:
        if key not in known:
            raise ConfigError(f"{prefix}{key}", "unknown field")
    kwargs = dict(doc)
    for key in ("alt0_range", "v0_range"):
        if key in kwargs and isinstance(kwargs[key], list):
            kwargs[key] = tuple(kwargs[key])
    try:
        return cls(**kwargs)
    except ConfigError:
        raise
    except (TypeError, ValueError) as e:
        raise ConfigError(prefix.rstrip("."), str(e)) from None


def config_from_dict(doc: dict) -> RunConfig:
    sections = {
        "rocket": (RocketModel, "rocket."),
        "sim": (SimConfig, "sim."),
        "dataset": (DatasetConfig, "dataset."),
        "train": (TrainConfig, "train."),
        "paths": (PathsConfig, "paths."),
    }
    kwargs = {}
    for key in doc:
        if key not in sections and key != "seed":
            raise ConfigError(key, "unknown top-level field")
    for name, (cls, prefix) in sections.items():
        section_doc = doc.get(name, {})
        if not isinstance(section_doc, dict):
            raise ConfigError(name, "must be an object")
        if cls is RocketModel:
            # surface per-field messages for rocket invariants
            known = set(cls.__dataclass_fields__)
            for key in section_doc:
                if key not in known:
                    raise ConfigError(f"rocket.{key}", "unknown field")
            try:
                kwargs[name] = cls(**section_doc)
            except ValueError as e:
                bad = _offending_rocket_field(section_doc)
                raise ConfigError(f"rocket.{bad}" if bad else "rocket", str(e)) from None
        else:
            kwargs[name] = _build_section(cls, name, section_doc, prefix)
    if "seed" in doc:
        kwargs["seed"] = doc["seed"]
    return RunConfig(**kwargs)


def _offending_rocket_field(section_doc: dict) -> Optional[str]:
    defaults = RocketModel()
    for key, value in section_doc.items():
        trial = asdict(defaults)
        trial[key] = value
        try:
            RocketModel(**trial)
        except ValueError:
            return key
    return None


def load_config(path) -> RunConfig:
    with open(path) as f:
        try:
            doc = json.load(f)
        except json.JSONDecodeError as e:
            raise ConfigError("<file>", f"invalid JSON: {e}") from None
    if not isinstance(doc, dict):
        raise ConfigError("<file>", "top level must be a JSON object")
    return config_from_dict(doc)
