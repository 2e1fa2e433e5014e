"""Pipeline configuration: documented keys, defaults, file loading, overrides.

Config files are flat ``key = value`` text; ``#`` starts a comment. Flag
overrides win over file values. Every numeric key is range-checked at load.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from pathlib import Path

from .featurize import TurningConfig
from .floors import FloorConfig
from .heading import HeadingConfig
from .stepdetect import StepConfig


class ConfigError(ValueError):
    pass


@dataclass
class PipelineConfig:
    step: StepConfig = field(default_factory=StepConfig)
    heading: HeadingConfig = field(default_factory=HeadingConfig)
    floor: FloorConfig = field(default_factory=FloorConfig)
    turn: TurningConfig = field(default_factory=TurningConfig)
    seed: int = 0
    floors_override: int | None = None   # fixed floor count instead of the cut
    gait_model_path: str | None = None


# key -> (section attr, field name, type, validator)
_POSITIVE = lambda v: v > 0
_KEYS = {
    "step.jerk_init": ("step", "jerk_init", float, _POSITIVE),
    "step.jerk_floor": ("step", "jerk_floor", float, _POSITIVE),
    "step.pace_init": ("step", "pace_init", float, _POSITIVE),
    "step.pace_floor": ("step", "pace_floor", float, _POSITIVE),
    "step.pace_ceiling": ("step", "pace_ceiling", float, _POSITIVE),
    "step.buffer_capacity": ("step", "buffer_capacity", int, lambda v: v >= 1),
    "step.update_ratio": ("step", "update_ratio", float, _POSITIVE),
    "step.smooth_window": ("step", "smooth_window", int, lambda v: v >= 1),
    "heading.g_tol": ("heading", "g_tol", float, _POSITIVE),
    "heading.corr_gate": ("heading", "corr_gate", float, lambda v: -1.0 <= v <= 1.0),
    "heading.corr_window_s": ("heading", "corr_window_s", float, _POSITIVE),
    "heading.pca_min_ratio": ("heading", "pca_min_ratio", float, lambda v: v >= 1.0),
    "floor.eps_hpa": ("floor", "eps_hpa", float, _POSITIVE),
    "floor.min_pts": ("floor", "min_pts", int, lambda v: v >= 1),
    "floor.cut": ("floor", "cut", float, lambda v: 0.0 < v <= 1.0),
    "floor.max_clusters": ("floor", "max_clusters", int, lambda v: v >= 1),
    "turn.epsilon_rad": ("turn", "epsilon_rad", float, _POSITIVE),
    "turn.window_min": ("turn", "window_min", int, lambda v: v >= 1),
    "turn.min_len_m": ("turn", "min_subtraj_len_m", float, _POSITIVE),
    "seed": (None, "seed", int, lambda v: True),
}


def parse_config_text(text: str, source: str = "<config>") -> dict[str, str]:
    entries: dict[str, str] = {}
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{line_no}: expected 'key = value', got {line!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in _KEYS:
            raise ConfigError(f"{source}:{line_no}: unknown config key {key!r}")
        entries[key] = value
    return entries


def apply_entries(cfg: PipelineConfig, entries: dict[str, str]) -> PipelineConfig:
    for key, raw in entries.items():
        section, name, typ, valid = _KEYS[key]
        try:
            value = typ(raw)
        except (TypeError, ValueError):
            raise ConfigError(f"config key {key} has unparsable value {raw!r}") from None
        if not valid(value):
            raise ConfigError(f"config key {key} = {value} is out of range")
        if section is None:
            setattr(cfg, name, value)
        else:
            setattr(cfg, section, replace(getattr(cfg, section), **{name: value}))
    if cfg.step.pace_floor > cfg.step.pace_ceiling:
        raise ConfigError("step.pace_floor must not exceed step.pace_ceiling")
    return cfg


def load_config(path: str | Path | None = None, overrides: dict[str, str] | None = None) -> PipelineConfig:
    """Defaults, then the config file (if any), then flag overrides."""
    cfg = PipelineConfig()
    if path is not None:
        text = Path(path).read_text(encoding="utf-8")
        cfg = apply_entries(cfg, parse_config_text(text, source=str(path)))
    if overrides:
        cfg = apply_entries(cfg, {k: str(v) for k, v in overrides.items()})
    return cfg
