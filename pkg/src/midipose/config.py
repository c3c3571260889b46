"""Strict TOML run configuration.

Every section maps onto a dataclass; unknown sections or keys are rejected
by name so a typo never silently falls back to a default.
"""
from __future__ import annotations

import dataclasses
import os
import sys
from dataclasses import dataclass, field
from typing import Any, Optional

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib


class ConfigError(ValueError):
    pass


@dataclass
class SceneSection:
    motions: list = field(default_factory=lambda: ["marktime", "lunge", "risehand", "walk", "squat"])
    duration_s: float = 16.0
    seed: int = 0
    snr_db: Optional[float] = 25.0
    csi_rate: float = 25.0
    label_rate: float = 15.0
    carrier_hz: float = 3.5e9
    subcarrier_spacing_hz: float = 30e3
    width: float = 3.3
    depth: float = 2.7
    device_height: float = 1.5


@dataclass
class FeaturesSection:
    window: int = 25


@dataclass
class TrainSection:
    model: str = "midipose"
    batch: int = 64
    epochs: int = 100
    lr: float = 0.008
    momentum: float = 0.9
    decay_factor: float = 0.5
    decay_every: int = 10
    seed: int = 0
    split: str = "random"


@dataclass
class EvalSection:
    thresholds: list = field(default_factory=lambda: [5, 10, 20, 30])
    slices: list = field(default_factory=list)  # e.g. ["state:marktime1", "process:walk"]; empty = all
    split: str = "test"
    compare: list = field(default_factory=list)  # extra checkpoints evaluated side by side


@dataclass
class PathsSection:
    dataset: str = "midipose.mdp"
    checkpoint: str = "midipose.mdpw"
    loss_log: str = "loss.log"
    reports: str = "reports"


@dataclass
class RunConfig:
    scene: SceneSection = field(default_factory=SceneSection)
    features: FeaturesSection = field(default_factory=FeaturesSection)
    train: TrainSection = field(default_factory=TrainSection)
    eval: EvalSection = field(default_factory=EvalSection)
    paths: PathsSection = field(default_factory=PathsSection)


def _coerce(section: str, key: str, value: Any, default: Any) -> Any:
    where = f"{section}.{key}"
    if isinstance(default, bool):
        if not isinstance(value, bool):
            raise ConfigError(f"{where}: expected a boolean, got {value!r}")
        return value
    if isinstance(default, int) and not isinstance(default, bool):
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{where}: expected an integer, got {value!r}")
        return value
    if isinstance(default, float) or key == "snr_db":
        # TOML has no null; "none" switches the receiver noise off.
        if key == "snr_db" and isinstance(value, str) and value.lower() == "none":
            return None
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{where}: expected a number, got {value!r}")
        return float(value)
    if isinstance(default, str):
        if not isinstance(value, str):
            raise ConfigError(f"{where}: expected a string, got {value!r}")
        return value
    if isinstance(default, list):
        if not isinstance(value, list):
            raise ConfigError(f"{where}: expected a list, got {value!r}")
        return value
    return value


def _apply(cfg: RunConfig, section: str, key: str, value: Any) -> None:
    if section not in {f.name for f in dataclasses.fields(RunConfig)}:
        raise ConfigError(f"unknown config section {section!r}")
    sec = getattr(cfg, section)
    names = {f.name for f in dataclasses.fields(sec)}
    if key not in names:
        raise ConfigError(f"unknown config key {section}.{key}")
    setattr(sec, key, _coerce(section, key, value, getattr(sec, key)))


def from_dict(data: dict) -> RunConfig:
    cfg = RunConfig()
    for section, values in data.items():
        if not isinstance(values, dict):
            raise ConfigError(f"unknown top-level key {section!r}")
        for key, value in values.items():
            _apply(cfg, section, key, value)
    validate(cfg)
    return cfg


def load_config(path: Optional[str] = None, overrides: Optional[list[str]] = None) -> RunConfig:
    """Defaults, then the TOML file, then ``MIDIPOSE_SEED``, then ``section.key=value`` overrides."""
    data: dict = {}
    if path is not None:
        try:
            with open(path, "rb") as fh:
                data = tomllib.load(fh)
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from None
    cfg = from_dict(data)
    env_seed = os.environ.get("MIDIPOSE_SEED")
    if env_seed is not None:
        try:
            seed = int(env_seed)
        except ValueError:
            raise ConfigError(f"MIDIPOSE_SEED must be an integer, got {env_seed!r}") from None
        cfg.scene.seed = seed
        cfg.train.seed = seed
    for item in overrides or []:
        apply_override(cfg, item)
    validate(cfg)
    return cfg


def apply_override(cfg: RunConfig, item: str) -> None:
    """Apply ``section.key=value``; the value is parsed as a TOML literal, else kept as a string."""
    if "=" not in item or "." not in item.split("=", 1)[0]:
        raise ConfigError(f"override must look like section.key=value, got {item!r}")
    lhs, raw = item.split("=", 1)
    section, key = lhs.strip().split(".", 1)
    try:
        value = tomllib.loads(f"v = {raw}")["v"]
    except tomllib.TOMLDecodeError:
        value = raw
    _apply(cfg, section, key, value)


def validate(cfg: RunConfig) -> None:
    from .csi import MotionKind
    from .evaluation import EvalSlice
    from .model import MODEL_KINDS

    for m in cfg.scene.motions:
        try:
            MotionKind.parse(str(m))
        except ValueError as exc:
            raise ConfigError(f"scene.motions: {exc}") from None
    if not cfg.scene.motions:
        raise ConfigError("scene.motions must not be empty")
    if cfg.scene.duration_s <= 0:
        raise ConfigError("scene.duration_s must be positive")
    if cfg.features.window < 2:
        raise ConfigError("features.window must be at least 2")
    if cfg.train.model not in MODEL_KINDS:
        raise ConfigError(f"train.model must be one of {', '.join(MODEL_KINDS)}, got {cfg.train.model!r}")
    if cfg.train.split not in ("random", "temporal"):
        raise ConfigError(f"train.split must be random or temporal, got {cfg.train.split!r}")
    if cfg.train.batch <= 0 or cfg.train.epochs <= 0:
        raise ConfigError("train.batch and train.epochs must be positive")
    if cfg.eval.split not in ("train", "test", "val"):
        raise ConfigError(f"eval.split must be train, test or val, got {cfg.eval.split!r}")
    if not cfg.eval.thresholds:
        raise ConfigError("eval.thresholds must not be empty")
    for a in cfg.eval.thresholds:
        if isinstance(a, bool) or not isinstance(a, (int, float)) or a <= 0:
            raise ConfigError(f"eval.thresholds: expected positive numbers, got {a!r}")
    for name in cfg.eval.slices:
        try:
            EvalSlice.parse(str(name))
        except ValueError as exc:
            raise ConfigError(f"eval.slices: {exc}") from None
