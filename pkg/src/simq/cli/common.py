"""Helpers shared by the command modules: config resolution, run layout, member loading."""

import argparse
import logging
import os
from pathlib import Path

import numpy as np
from pydantic import ValidationError

from ..ensemble import NoiseSchedule, QEnsemble
from ..errors import ConfigError
from ..naf import QModel, load_model
from ..schemas import (
    BASIS_PRESETS,
    SYSTEM_PRESETS,
    RunConfig,
    apply_desk_scale,
    get_preset,
    load_config,
    resolve_ids,
)

logger = logging.getLogger(__name__)

DEFAULT_PRESET = "benchmark"


def add_common_arguments(parser: argparse.ArgumentParser) -> None:
    """Flags every command accepts."""
    parser.add_argument("--config", type=Path, help="JSON run configuration (overrides --preset)")
    parser.add_argument("--preset", default=DEFAULT_PRESET, help="Named configuration: benchmark (alias paper) or desk")
    parser.add_argument("--desk-scale", action="store_true", help="Shrink the network and episode budget")
    parser.add_argument("--seed", type=int, help="Base seed (overrides the config)")
    parser.add_argument("--out", type=Path, help="Run directory (default: $SIMQ_OUTPUT_DIR or runs/<name>)")


def parse_list(text: str | None) -> list[str] | None:
    """Split a comma-separated flag value; None stays None and '' is the empty list."""
    if text is None:
        return None
    return [token.strip() for token in text.split(",") if token.strip()]


def parse_floats(text: str | None, name: str) -> list[float] | None:
    tokens = parse_list(text)
    if tokens is None:
        return None
    try:
        return [float(t) for t in tokens]
    except ValueError:
        raise ConfigError(f"--{name} expects comma-separated numbers, got '{text}'") from None


def resolve_config(args: argparse.Namespace) -> RunConfig:
    """Build the run config from --config or --preset, then apply --desk-scale and --seed."""
    cfg = load_config(args.config) if args.config else get_preset(args.preset)
    if args.desk_scale:
        cfg = apply_desk_scale(cfg)
    if args.seed is not None:
        cfg = cfg.model_copy(update={"seed": args.seed})
    return cfg


def run_dir(args: argparse.Namespace, cfg: RunConfig) -> Path:
    """Output directory: --out, then SIMQ_OUTPUT_DIR, then the config, then runs/<name>."""
    out = args.out or os.getenv("SIMQ_OUTPUT_DIR") or cfg.output_dir or Path("runs") / cfg.name
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def write_snapshot(out: Path, cfg: RunConfig) -> Path:
    """Write the effective configuration next to the run outputs."""
    path = out / "config.json"
    path.write_text(cfg.model_dump_json(indent=2))
    return path


def with_stage2(cfg: RunConfig, **update) -> RunConfig:
    """Re-validate the config with stage-2 fields replaced.

    Raises:
        ConfigError: If the result fails validation
    """
    data = cfg.model_dump()
    data["stage2"].update(update)
    try:
        return RunConfig.model_validate(data)
    except ValidationError as e:
        raise ConfigError(f"Invalid stage-2 override: {e}") from e


def model_path(out: Path, system_id: str) -> Path:
    return out / "models" / f"system-{system_id}.npz"


def train_log_path(out: Path, system_id: str) -> Path:
    return out / "logs" / f"train-{system_id}.csv"


def system_ids(cfg: RunConfig, tokens: list[str] | None) -> list[str]:
    """Virtual-system ids to train; None means every configured system."""
    if tokens is None:
        return list(cfg.virtual_systems)
    return resolve_ids(tokens, SYSTEM_PRESETS, cfg.virtual_systems)


def basis_ids(cfg: RunConfig, tokens: list[str] | None) -> list[str]:
    """Member ids of the ensemble; None means the configured basis."""
    ids = resolve_ids(tokens if tokens is not None else cfg.stage2.basis, BASIS_PRESETS, cfg.virtual_systems)
    if not ids:
        raise ConfigError("The basis must name at least one member")
    return ids


def load_members(out: Path, ids: list[str]) -> tuple[QModel, ...]:
    """Load pre-trained members from the run directory.

    Raises:
        ModelFileError: If a member file is missing or unreadable
    """
    return tuple(load_model(model_path(out, i)) for i in ids)


def noise_schedule(cfg: RunConfig) -> NoiseSchedule:
    return NoiseSchedule(**cfg.stage2.noise.model_dump())


def ensemble_options(cfg: RunConfig) -> dict:
    s2 = cfg.stage2
    return {
        "eta": s2.eta,
        "eps_w": s2.eps_w,
        "alpha": s2.alpha,
        "gamma": s2.gamma,
        "max_halvings": s2.max_halvings,
        "positivity": s2.positivity,
    }


def build_ensemble(cfg: RunConfig, members: tuple[QModel, ...], weights: list[float] | None = None) -> QEnsemble:
    """Ensemble with stage-2 settings and uniform (or given) weights."""
    if weights is None:
        return QEnsemble.uniform(members, **ensemble_options(cfg))
    w = np.asarray(weights, dtype=np.float64)
    if w.shape != (len(members),) or np.any(w < 0.0) or not np.isclose(w.sum(), 1.0):
        raise ConfigError(f"--weights must be {len(members)} nonnegative numbers summing to 1")
    return QEnsemble(members=members, weights=w, **ensemble_options(cfg))
