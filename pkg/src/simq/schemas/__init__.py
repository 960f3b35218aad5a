"""Pydantic schemas for run configuration."""

from .models import (
    EvalConfig,
    NoiseConfig,
    PlantConfig,
    RewardConfig,
    RunConfig,
    Stage1Config,
    Stage2Config,
    VirtualSystemConfig,
)
from .presets import (
    BASIS_PRESETS,
    BENCHMARK_VIRTUAL_SYSTEMS,
    SYSTEM_PRESETS,
    apply_desk_scale,
    benchmark_config,
    desk_config,
    get_preset,
    learning_rate_for,
    load_config,
    resolve_ids,
)

__all__ = [
    "EvalConfig",
    "NoiseConfig",
    "PlantConfig",
    "RewardConfig",
    "RunConfig",
    "Stage1Config",
    "Stage2Config",
    "VirtualSystemConfig",
    "BASIS_PRESETS",
    "BENCHMARK_VIRTUAL_SYSTEMS",
    "SYSTEM_PRESETS",
    "apply_desk_scale",
    "benchmark_config",
    "desk_config",
    "get_preset",
    "learning_rate_for",
    "load_config",
    "resolve_ids",
]
