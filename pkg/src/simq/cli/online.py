"""online: adapt the ensemble weights on the real system."""

import argparse
import logging
from pathlib import Path

import numpy as np

from ..ensemble import OnlineResult, online_run
from ..export import write_online_log
from ..schemas import RunConfig
from .common import basis_ids, build_ensemble, load_members, noise_schedule, parse_floats, parse_list, with_stage2

logger = logging.getLogger(__name__)


def register(subparsers: argparse._SubParsersAction) -> argparse.ArgumentParser:
    parser = subparsers.add_parser("online", help="Run online weight adaptation on the real system")
    parser.add_argument("--basis", help="Comma-separated member ids or a case preset (default: config basis)")
    parser.add_argument("--xi", help="Real system parameters, e.g. 0.95,5.5")
    parser.add_argument("--schedule", choices=["up", "down"], help="Slowly varying xi2 profile")
    parser.set_defaults(handler=run)
    return parser


def cmd_online(cfg: RunConfig, ids: list[str], out: Path) -> OnlineResult:
    """Run one online adaptation and write online.csv.

    Raises:
        ModelFileError: If a member model is missing
        DivergenceError: If the real system diverges
    """
    s2 = cfg.stage2
    ensemble = build_ensemble(cfg, load_members(out, ids))
    schedule = s2.xi_schedule() if s2.schedule is not None else None
    plant = cfg.plant_spec(schedule.start if schedule is not None else s2.real_xi)

    logger.info("Online run with basis %s for %d steps", ",".join(ids), s2.steps)
    result = online_run(
        ensemble,
        plant,
        cfg.reward_spec(),
        noise_schedule(cfg),
        s2.steps,
        np.asarray(s2.initial_state),
        np.random.default_rng(cfg.seed),
        schedule=schedule,
    )
    write_online_log(out / "online.csv", result.log)
    logger.info(
        "Online score %.2f, final weights %s, %d skipped updates",
        result.score, np.round(result.final_weights, 4).tolist(), result.skipped_updates,
    )
    return result


def run(args: argparse.Namespace, cfg: RunConfig, out: Path) -> int:
    update: dict = {}
    xi = parse_floats(args.xi, "xi")
    if xi is not None:
        update["real_xi"] = xi
    if args.schedule is not None:
        update["schedule"] = args.schedule
    if update:
        cfg = with_stage2(cfg, **update)
    cmd_online(cfg, basis_ids(cfg, parse_list(args.basis)), out)
    return 0
