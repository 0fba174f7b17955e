"""Pipeline configuration profiles.

Profile S targets single-class scenes (224 crops, schedule 12/9/7.75);
profile M targets multi-class scenes (500 crops, schedule 5/4/3). Any
field can be overridden from a JSON config file or CLI flags.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path

from .errors import ConfigError
from .finch import ThresholdSchedule
from .maskproc import FilterConfig
from .multiscale import MultiscaleConfig


@dataclass(frozen=True)
class PipelineConfig:
    profile: str = "S"
    grid_spacing: int = 10
    filter: FilterConfig = field(default_factory=FilterConfig)
    multiscale: MultiscaleConfig = field(default_factory=MultiscaleConfig)
    crop_target: int = 224
    schedule: ThresholdSchedule = field(default_factory=lambda: ThresholdSchedule((12.0, 9.0, 7.75)))
    provider_spec: str = "mock"
    embedder_spec: str = "baseline"
    mask_processing: bool = True
    clustering: bool = True
    scaling: bool = True
    workers: int = 1
    seed: int = 0

    def effective_multiscale(self) -> MultiscaleConfig:
        """Scaling ablation realized as a zero-depth refinement."""
        if self.scaling:
            return self.multiscale
        return replace(self.multiscale, max_depth=0)


PROFILES = {
    "S": PipelineConfig(
        profile="S", crop_target=224, schedule=ThresholdSchedule((12.0, 9.0, 7.75))
    ),
    "M": PipelineConfig(profile="M", crop_target=500, schedule=ThresholdSchedule((5.0, 4.0, 3.0))),
}


def from_profile(name: str) -> PipelineConfig:
    try:
        return PROFILES[name.upper()]
    except KeyError:
        raise ConfigError(f"unknown profile {name!r}; expected one of {sorted(PROFILES)}")


def load_config_file(path, base: PipelineConfig) -> PipelineConfig:
    """Apply a JSON override file on top of a base profile config."""
    try:
        overrides = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    if not isinstance(overrides, dict):
        raise ConfigError(f"config file {path} must contain a JSON object")
    return apply_overrides(base, overrides)


def apply_overrides(base: PipelineConfig, overrides: dict) -> PipelineConfig:
    cfg = base
    try:
        if "profile" in overrides:
            cfg = replace(from_profile(overrides["profile"]), provider_spec=cfg.provider_spec,
                          embedder_spec=cfg.embedder_spec)
        simple = {
            k: overrides[k]
            for k in (
                "grid_spacing",
                "crop_target",
                "provider_spec",
                "embedder_spec",
                "mask_processing",
                "clustering",
                "scaling",
                "workers",
                "seed",
            )
            if k in overrides
        }
        if simple:
            cfg = replace(cfg, **simple)
        if "schedule" in overrides:
            raw = overrides["schedule"]
            sched = (
                ThresholdSchedule.parse(raw)
                if isinstance(raw, str)
                else ThresholdSchedule(tuple(float(v) for v in raw))
            )
            cfg = replace(cfg, schedule=sched)
        if "filter" in overrides:
            cfg = replace(cfg, filter=FilterConfig(**overrides["filter"]))
        if "multiscale" in overrides:
            cfg = replace(cfg, multiscale=MultiscaleConfig(**overrides["multiscale"]))
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid configuration override: {exc}") from exc
    return cfg
