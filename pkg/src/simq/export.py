"""CSV writers for training logs, online logs, sweeps, surfaces and traces."""

import logging
from pathlib import Path

import numpy as np
import pandas as pd

from .evalkit import PolicySurface
from .models import EpisodeLog, OnlineLog, ScoreReport, SweepGrid

logger = logging.getLogger(__name__)

FLOAT_FORMAT = "%.10g"


def _columns(prefix: str, n: int) -> list[str]:
    return [prefix] if n == 1 else [f"{prefix}{i + 1}" for i in range(n)]


def _write(df: pd.DataFrame, path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    df.to_csv(path, index=False, float_format=FLOAT_FORMAT)
    logger.info("Wrote %s (%d rows)", path, len(df))
    return path


def training_log_frame(log: list[EpisodeLog]) -> pd.DataFrame:
    return pd.DataFrame(
        {
            "episode": [e.episode for e in log],
            "return": [e.episode_return for e in log],
            "mean_loss": [e.mean_loss for e in log],
            "final_state_norm": [e.final_state_norm for e in log],
        }
    )


def write_training_log(path: str | Path, log: list[EpisodeLog]) -> Path:
    return _write(training_log_frame(log), path)


def online_log_frame(log: OnlineLog) -> pd.DataFrame:
    """One row per online step: k, state, action, reward, |delta|, weights after the update."""
    if not log.records:
        return pd.DataFrame(columns=["k", "x1", "x2", "a", "r", "abs_delta", "halvings"])

    x = np.array([rec.x for rec in log.records])
    a = np.array([np.atleast_1d(rec.a) for rec in log.records])
    w = np.array([rec.w for rec in log.records])

    df = pd.DataFrame({"k": [rec.k for rec in log.records]})
    for i in range(x.shape[1]):
        df[f"x{i + 1}"] = x[:, i]
    for i, name in enumerate(_columns("a", a.shape[1])):
        df[name] = a[:, i]
    df["r"] = [rec.r for rec in log.records]
    df["abs_delta"] = log.abs_deltas()
    for j in range(w.shape[1]):
        df[f"w_{j + 1}"] = w[:, j]
    df["halvings"] = [rec.halvings for rec in log.records]
    return df


def write_online_log(path: str | Path, log: OnlineLog) -> Path:
    return _write(online_log_frame(log), path)


def sweep_frame(grid: SweepGrid) -> pd.DataFrame:
    """Long format, row-major over (xi1, xi2)."""
    xi1, xi2 = np.meshgrid(grid.xi1_values, grid.xi2_values, indexing="ij")
    df = pd.DataFrame(
        {
            "xi1": xi1.ravel(),
            "xi2": xi2.ravel(),
            "score": grid.scores.ravel(),
            "success": grid.success.ravel(),
        }
    )
    if grid.seeds is not None:
        df["seed"] = grid.seeds.ravel()
    return df


def write_sweep_csv(path: str | Path, grid: SweepGrid) -> Path:
    return _write(sweep_frame(grid), path)


def surface_frame(surface: PolicySurface) -> pd.DataFrame:
    x1, x2 = np.meshgrid(surface.x1_values, surface.x2_values, indexing="ij")
    df = pd.DataFrame({"x1": x1.ravel(), "x2": x2.ravel()})
    actions = surface.actions.reshape(x1.size, -1)
    for i, name in enumerate(_columns("action", actions.shape[1])):
        df[name] = actions[:, i]
    return df


def write_surface_csv(path: str | Path, surface: PolicySurface) -> Path:
    return _write(surface_frame(surface), path)


def trace_frame(report: ScoreReport) -> pd.DataFrame:
    """Columns k, x1.., a, r of a rollout kept with its trajectory."""
    if report.states is None:
        raise ValueError("Score report carries no trajectory; use evalkit.rollout")
    states = np.atleast_2d(report.states)
    actions = np.asarray(report.actions).reshape(states.shape[0], -1)
    df = pd.DataFrame({"k": np.arange(states.shape[0])})
    for i in range(states.shape[1]):
        df[f"x{i + 1}"] = states[:, i]
    for i, name in enumerate(_columns("a", actions.shape[1])):
        df[name] = actions[:, i]
    df["r"] = report.rewards
    return df


def write_trace_csv(path: str | Path, report: ScoreReport) -> Path:
    return _write(trace_frame(report), path)
