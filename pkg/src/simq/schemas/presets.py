"""Named configurations: the eight virtual systems, basis cases and run presets."""

import json
import logging
from pathlib import Path

from pydantic import ValidationError

from ..errors import ConfigError
from .models import RunConfig, Stage1Config, VirtualSystemConfig

logger = logging.getLogger(__name__)

# (xi, Adam step size) per virtual system
BENCHMARK_VIRTUAL_SYSTEMS: dict[str, VirtualSystemConfig] = {
    "1": VirtualSystemConfig(xi=[0.0, 5.0], learning_rate=5.0e-4),
    "2": VirtualSystemConfig(xi=[1.0, 5.0], learning_rate=5.0e-5),
    "3": VirtualSystemConfig(xi=[0.0, 50.0], learning_rate=1.0e-4),
    "4": VirtualSystemConfig(xi=[1.0, 50.0], learning_rate=1.0e-4),
    "5": VirtualSystemConfig(xi=[0.4, 16.0], learning_rate=5.0e-5),
    "6": VirtualSystemConfig(xi=[0.6, 16.0], learning_rate=5.0e-5),
    "7": VirtualSystemConfig(xi=[0.4, 32.0], learning_rate=1.0e-4),
    "8": VirtualSystemConfig(xi=[0.6, 32.0], learning_rate=1.0e-4),
}

BASIS_PRESETS: dict[str, list[str]] = {
    "case-1": ["1", "2", "3", "4"],
    "case-2": ["5", "6", "7", "8"],
    "case-3": ["1", "6", "7", "8"],
    "case-4": ["5", "2", "7", "8"],
    "case-5": ["1", "2", "7", "8"],
    "n2": ["1", "2"],
    "n3": ["1", "2", "4"],
    "n8": ["1", "2", "3", "4", "5", "6", "7", "8"],
}

SYSTEM_PRESETS: dict[str, list[str]] = {
    "benchmark-8": list(BENCHMARK_VIRTUAL_SYSTEMS),
    "paper-8": list(BENCHMARK_VIRTUAL_SYSTEMS),
}

DESK_STAGE1 = {"episodes": 500, "steps_per_episode": 200, "batch_size": 128, "hidden": [64, 64]}


def benchmark_config() -> RunConfig:
    """All constants of the benchmark study with the full-size network."""
    return RunConfig(
        name="benchmark",
        virtual_systems={k: v.model_copy() for k, v in BENCHMARK_VIRTUAL_SYSTEMS.items()},
        # Episode count is not given for the full-size runs; 1000 is our choice.
        stage1=Stage1Config(episodes=1000, hidden=[128, 128, 128, 128]),
    )


def desk_config() -> RunConfig:
    """Benchmark constants with a network and episode budget sized for one CPU core."""
    return apply_desk_scale(benchmark_config().model_copy(update={"name": "desk"}))


PRESETS = {"benchmark": benchmark_config, "paper": benchmark_config, "desk": desk_config}


def apply_desk_scale(cfg: RunConfig) -> RunConfig:
    """Shrink the network and episode budget of a config."""
    stage1 = cfg.stage1.model_copy(update=DESK_STAGE1)
    return cfg.model_copy(update={"stage1": stage1})


def get_preset(name: str) -> RunConfig:
    try:
        return PRESETS[name]()
    except KeyError:
        raise ConfigError(f"Unknown preset '{name}'. Valid presets: {', '.join(PRESETS)}") from None


def load_config(path: str | Path) -> RunConfig:
    """Read and validate a JSON run config.

    Raises:
        ConfigError: If the file is missing or fails validation
    """
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as e:
        raise ConfigError(f"Cannot read config {path}: {e}") from e
    try:
        return RunConfig.model_validate(json.loads(text))
    except (json.JSONDecodeError, ValidationError) as e:
        raise ConfigError(f"Invalid config {path}: {e}") from e


def resolve_ids(tokens: list[str], presets: dict[str, list[str]], known: dict) -> list[str]:
    """Expand preset names and validate ids against the configured virtual systems."""
    ids: list[str] = []
    for token in tokens:
        ids.extend(presets.get(token, [token]))
    unknown = [i for i in ids if i not in known]
    if unknown:
        raise ConfigError(f"Unknown virtual system id(s): {', '.join(unknown)}. Known: {', '.join(known)}")
    return ids


def learning_rate_for(cfg: RunConfig, system_id: str) -> float:
    """Per-system step size, falling back to the stage-1 default."""
    rate = cfg.virtual_systems[system_id].learning_rate
    return cfg.stage1.learning_rate if rate is None else rate
