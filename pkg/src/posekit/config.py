"""Pipeline configuration: one JSON document covering every stage.

Unknown fields are rejected by name so typos never silently fall back
to defaults. Every section has a complete set of defaults, making the
config file itself optional.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field, fields, replace

from .camera import CameraIntrinsics
from .crm import CrmConfig
from .errors import ConfigError
from .estimator import TrainConfig
from .posegen import GeneratorConfig
from .propensity import DEFAULT_BIN_COUNT, DEFAULT_EPSILON


@dataclass(frozen=True)
class HistogramConfig:
    bin_count: int = DEFAULT_BIN_COUNT
    epsilon: float = DEFAULT_EPSILON
    gt_fraction: float = 0.25

    def __post_init__(self):
        if self.bin_count < 1:
            raise ConfigError(f"bin_count must be >= 1, got {self.bin_count}")
        if not (0.0 <= self.epsilon) or self.bin_count**2 * self.epsilon >= 1.0:
            raise ConfigError(
                f"epsilon {self.epsilon!r} invalid for bin_count {self.bin_count}"
            )
        if not (0.0 < self.gt_fraction <= 1.0):
            raise ConfigError(
                f"gt_fraction must be in (0, 1], got {self.gt_fraction}"
            )


@dataclass(frozen=True)
class ModelConfig:
    hidden: int = 256
    blocks: int = 2
    activation: str = "relu"
    input_scale: float | None = None  # None resolves from the camera

    def __post_init__(self):
        if self.hidden < 1 or self.blocks < 0:
            raise ConfigError(
                f"invalid architecture: hidden={self.hidden}, blocks={self.blocks}"
            )


@dataclass(frozen=True)
class PipelineConfig:
    seed: int = 0
    topology_path: str | None = None
    camera: CameraIntrinsics = field(default_factory=CameraIntrinsics)
    generator: GeneratorConfig = field(default_factory=GeneratorConfig)
    histogram: HistogramConfig = field(default_factory=HistogramConfig)
    crm: CrmConfig = field(default_factory=CrmConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    model: ModelConfig = field(default_factory=ModelConfig)


_TUPLE_FIELDS = {"root_x", "root_y", "root_z", "global_rotation"}


def _build_section(cls, doc: dict, section: str):
    names = {f.name for f in fields(cls)}
    unknown = set(doc) - names
    if unknown:
        raise ConfigError(
            f"unknown field(s) in [{section}]: {', '.join(sorted(unknown))}"
        )
    kwargs = {}
    for key, value in doc.items():
        if key == "global_rotation":
            value = tuple(tuple(pair) for pair in value)
        elif key in _TUPLE_FIELDS:
            value = tuple(value)
        kwargs[key] = value
    try:
        return cls(**kwargs)
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid [{section}] section: {exc}") from exc


_SECTIONS = {
    "camera": CameraIntrinsics,
    "generator": GeneratorConfig,
    "histogram": HistogramConfig,
    "crm": CrmConfig,
    "train": TrainConfig,
    "model": ModelConfig,
}


def config_from_dict(doc: dict) -> PipelineConfig:
    known = set(_SECTIONS) | {"seed", "topology_path"}
    unknown = set(doc) - known
    if unknown:
        raise ConfigError(f"unknown config field(s): {', '.join(sorted(unknown))}")
    kwargs = {}
    if "seed" in doc:
        if not isinstance(doc["seed"], int):
            raise ConfigError(f"seed must be an integer, got {doc['seed']!r}")
        kwargs["seed"] = doc["seed"]
    if "topology_path" in doc and doc["topology_path"] is not None:
        kwargs["topology_path"] = str(doc["topology_path"])
    for section, cls in _SECTIONS.items():
        if section in doc:
            body = doc[section]
            if not isinstance(body, dict):
                raise ConfigError(f"[{section}] must be an object")
            if section == "camera":
                kwargs[section] = CameraIntrinsics.from_json_dict(body)
            else:
                kwargs[section] = _build_section(cls, body, section)
    return PipelineConfig(**kwargs)


def load_config(path: str | None) -> PipelineConfig:
    if path is None:
        return PipelineConfig()
    if not os.path.exists(path):
        raise ConfigError(f"config file not found: {path}")
    with open(path, "r") as handle:
        try:
            doc = json.load(handle)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: malformed config JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise ConfigError(f"{path}: config root must be a JSON object")
    return config_from_dict(doc)


def apply_seed(cfg: PipelineConfig, seed: int | None) -> PipelineConfig:
    """Stamp the effective run seed into every stage.

    The CLI --seed wins over the config-level "seed"; either way the
    generator and trainer rng_seed fields are derived from it, so one
    number pins the whole pipeline.
    """
    if seed is None:
        seed = cfg.seed
    return replace(
        cfg,
        seed=seed,
        generator=replace(cfg.generator, rng_seed=seed),
        train=replace(cfg.train, rng_seed=seed),
    )
