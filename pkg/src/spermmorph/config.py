"""Measurement configuration and the flat ``section.key=value`` file format."""
from __future__ import annotations

import math
from dataclasses import dataclass, fields, replace
from pathlib import Path

from .derivatives import GaussianSpec


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class MeasurementConfig:
    # derivatives / ridge detection
    sigma: float = 1.8
    strength_threshold: float = 0.01
    dark_lines: bool = False
    mask_margin: int = 2
    # linking
    r_link: float = 2.0
    theta_max: float = 45.0
    gamma: float = 1.0
    min_points: int = 10
    # edges and width
    max_halfwidth: float = 8.0
    edge_threshold: float = 0.005
    width_model: str = "gaussian"
    # endpoint filtering and reconstruction
    cos_threshold: float = 0.9
    w1: float = 0.5
    w2: float = 0.5
    momentum_alpha: float = 0.9
    max_steps: int = 200
    # morphometry
    curvature_window: float = 10.0
    microns_per_pixel: float = 1.0
    steger_baseline: bool = False
    baseline_gated: bool = False

    def __post_init__(self):
        positive = ("sigma", "r_link", "theta_max", "max_halfwidth", "curvature_window",
                    "microns_per_pixel", "max_steps", "min_points")
        for name in positive:
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0):
                raise ConfigError(f"{name} must be positive, got {v}")
        for name in ("strength_threshold", "gamma", "edge_threshold", "w1", "w2", "mask_margin"):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be non-negative")
        if not 0 < self.cos_threshold <= 1:
            raise ConfigError("cos_threshold must lie in (0, 1]")
        if not 0 <= self.momentum_alpha < 1:
            raise ConfigError("momentum_alpha must lie in [0, 1)")
        if self.min_points < 2:
            raise ConfigError("min_points must be at least 2")
        if self.width_model not in ("gaussian", "bar", "none"):
            raise ConfigError(f"unknown width_model {self.width_model!r}")

    @property
    def gaussian(self) -> GaussianSpec:
        return GaussianSpec(self.sigma)

    def replace(self, **changes) -> "MeasurementConfig":
        return replace(self, **changes)


# dotted key -> field name
KEYS = {
    "steger.sigma": "sigma",
    "steger.strength_threshold": "strength_threshold",
    "steger.dark_lines": "dark_lines",
    "steger.mask_margin": "mask_margin",
    "steger.r_link": "r_link",
    "steger.theta_max": "theta_max",
    "steger.gamma": "gamma",
    "steger.min_points": "min_points",
    "steger.max_halfwidth": "max_halfwidth",
    "steger.edge_threshold": "edge_threshold",
    "steger.width_model": "width_model",
    "endpoint.cos_threshold": "cos_threshold",
    "endpoint.w1": "w1",
    "endpoint.w2": "w2",
    "endpoint.momentum_alpha": "momentum_alpha",
    "endpoint.max_steps": "max_steps",
    "morph.curvature_window": "curvature_window",
    "scale.um_per_px": "microns_per_pixel",
    "pipeline.steger_baseline": "steger_baseline",
    "pipeline.baseline_gated": "baseline_gated",
}

_TYPES = {f.name: f.type for f in fields(MeasurementConfig)}


def _coerce(name: str, raw: str):
    kind = _TYPES[name]
    raw = raw.strip()
    if kind == "bool":
        low = raw.lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise ConfigError(f"{name}: not a boolean: {raw!r}")
    try:
        if kind == "int":
            return int(raw)
        if kind == "float":
            return float(raw)
    except ValueError as exc:
        raise ConfigError(f"{name}: cannot parse {raw!r}") from exc
    return raw


def parse_config_text(text: str, base: MeasurementConfig | None = None) -> MeasurementConfig:
    """Parse ``key=value`` lines; ``#`` starts a comment."""
    values = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key=value")
        key, raw = (p.strip() for p in line.split("=", 1))
        if key not in KEYS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        values[KEYS[key]] = _coerce(KEYS[key], raw)
    return replace(base or MeasurementConfig(), **values)


def load_config(path) -> MeasurementConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    return parse_config_text(text)


def config_text(cfg: MeasurementConfig) -> str:
    return "\n".join(f"{key}={getattr(cfg, name)}" for key, name in KEYS.items()) + "\n"
