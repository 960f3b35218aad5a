"""sweep: score a member policy or the online learner over the xi grid."""

import argparse
import logging
from pathlib import Path

import numpy as np

from ..evalkit import MemberPolicy, OnlineLearnerScorer, PolicyScorer, sweep
from ..export import write_sweep_csv
from ..models import SweepGrid
from ..naf import load_model
from ..schemas import RunConfig
from .common import basis_ids, ensemble_options, load_members, model_path, noise_schedule, parse_list

logger = logging.getLogger(__name__)


def register(subparsers: argparse._SubParsersAction) -> argparse.ArgumentParser:
    parser = subparsers.add_parser("sweep", help="Score every cell of the xi grid")
    parser.add_argument("--basis", help="Comma-separated member ids or a case preset (default: config basis)")
    parser.add_argument("--member", help="Score this frozen member instead of running the online learner")
    parser.add_argument("--workers", type=int, default=1, help="Parallel cell processes")
    parser.set_defaults(handler=run)
    return parser


def cmd_sweep(
    cfg: RunConfig, ids: list[str], out: Path, member: str | None = None, workers: int = 1
) -> tuple[SweepGrid, Path]:
    """Sweep the configured grid and write sweep.csv (or sweep-member-<id>.csv).

    Each online cell starts from uniform weights with its own noise seed.
    """
    ev = cfg.eval
    if member is not None:
        scorer = PolicyScorer(
            MemberPolicy(load_model(model_path(out, member))),
            cfg.reward_spec(),
            x0=tuple(ev.initial_state),
            horizon=ev.horizon,
        )
        path = out / f"sweep-member-{member}.csv"
    else:
        scorer = OnlineLearnerScorer(
            load_members(out, ids),
            cfg.reward_spec(),
            noise=noise_schedule(cfg),
            steps=cfg.stage2.steps,
            x0=tuple(cfg.stage2.initial_state),
            ensemble_options=ensemble_options(cfg),
        )
        path = out / "sweep.csv"

    template = cfg.plant_spec([ev.xi1_values[0], ev.xi2_values[0]])
    grid = sweep(scorer, template, ev.xi1_values, ev.xi2_values, base_seed=cfg.seed, workers=workers)
    write_sweep_csv(path, grid)
    logger.info("%d of %d cells succeed", int(np.sum(grid.success)), grid.scores.size)
    return grid, path


def run(args: argparse.Namespace, cfg: RunConfig, out: Path) -> int:
    member = None
    if args.member is not None:
        member = basis_ids(cfg, [args.member])[0]
    cmd_sweep(cfg, basis_ids(cfg, parse_list(args.basis)), out, member, args.workers)
    return 0
