"""One YAML file holding every setting of a run.

Top-level sections map onto the dataclasses that own them::

    model:     NetSpec
    priors:    PriorConfig   (expanded into LayerSpecs by make_specs)
    data:      DataConfig    (synthetic split sizes and seeds)
    train:     TrainConfig
    augment:   AugmentConfig
    inference: InferenceConfig
    eval:      EvalConfig

Missing keys take the dataclass defaults; unknown keys are an error.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path

import yaml

from .augment import AugmentConfig
from .evaluation import EvalConfig
from .inference import InferenceConfig
from .priors import FOUR, LayerSpec, make_specs
from .tinynet.model import NetSpec
from .tinynet.train import TrainConfig


class ConfigError(ValueError):
    pass


@dataclass
class PriorConfig:
    """Prior tiling: one grid size and aspect-ratio list per prediction layer."""

    grid_sizes: tuple[int, ...] = (8, 4, 2, 1)
    aspect_ratios: tuple[tuple[float, ...], ...] = (FOUR,) * 4
    s_min: float = 0.2
    s_max: float = 0.9
    first_scale: float | None = None
    include_extra: bool = True

    def __post_init__(self):
        self.grid_sizes = tuple(int(g) for g in self.grid_sizes)
        self.aspect_ratios = tuple(tuple(float(r) for r in rs) for rs in self.aspect_ratios)

    def specs(self) -> list[LayerSpec]:
        return make_specs(
            self.grid_sizes, self.aspect_ratios, self.s_min, self.s_max, self.first_scale, self.include_extra
        )


@dataclass
class DataConfig:
    train_seed: int = 0
    train_images: int = 2000
    test_seed: int = 1
    test_images: int = 500


SECTIONS = {
    "model": NetSpec,
    "priors": PriorConfig,
    "data": DataConfig,
    "train": TrainConfig,
    "augment": AugmentConfig,
    "inference": InferenceConfig,
    "eval": EvalConfig,
}


@dataclass
class RunConfig:
    model: NetSpec = field(default_factory=NetSpec)
    priors: PriorConfig = field(default_factory=PriorConfig)
    data: DataConfig = field(default_factory=DataConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    augment: AugmentConfig = field(default_factory=AugmentConfig)
    inference: InferenceConfig = field(default_factory=InferenceConfig)
    eval: EvalConfig = field(default_factory=EvalConfig)

    def specs(self) -> list[LayerSpec]:
        return self.priors.specs()

    def to_dict(self) -> dict:
        return {name: _plain(dataclasses.asdict(getattr(self, name))) for name in SECTIONS}


def _plain(value):
    if isinstance(value, dict):
        return {k: _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    return value


def _build(cls, values: dict, where: str):
    if not isinstance(values, dict):
        raise ConfigError(f"section '{where}' must be a mapping")
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = sorted(set(values) - names)
    if unknown:
        raise ConfigError(f"unknown key(s) in '{where}': {', '.join(unknown)}")
    try:
        return cls(**values)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid '{where}' section: {exc}") from exc


def from_dict(data: dict | None) -> RunConfig:
    data = data or {}
    if not isinstance(data, dict):
        raise ConfigError("configuration root must be a mapping")
    unknown = sorted(set(data) - set(SECTIONS))
    if unknown:
        raise ConfigError(f"unknown section(s): {', '.join(unknown)}")
    return RunConfig(**{name: _build(cls, data.get(name) or {}, name) for name, cls in SECTIONS.items()})


def load(path) -> RunConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from exc
    try:
        return from_dict(yaml.safe_load(text))
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: malformed YAML: {exc}") from exc


def dumps(cfg: RunConfig) -> str:
    return yaml.safe_dump(cfg.to_dict(), sort_keys=False)


def save(path, cfg: RunConfig) -> None:
    Path(path).write_text(dumps(cfg))


def apply_overrides(cfg: RunConfig, overrides: list[str]) -> RunConfig:
    """Return a copy with ``section.key=value`` overrides applied (values parsed as YAML)."""
    data = cfg.to_dict()
    for item in overrides:
        key, sep, raw = item.partition("=")
        section, dot, name = key.strip().partition(".")
        if not sep or not dot:
            raise ConfigError(f"override '{item}' is not of the form section.key=value")
        if section not in data:
            raise ConfigError(f"unknown section '{section}' in override '{item}'")
        data[section][name] = yaml.safe_load(raw)
    return from_dict(data)

