"""score: noiseless rollout score and time-response trace of one policy."""

import argparse
import logging
from pathlib import Path

from ..evalkit import rollout
from ..export import write_trace_csv
from ..models import ScoreReport
from ..schemas import RunConfig
from .common import parse_floats
from .surface import add_policy_arguments, select_policy

logger = logging.getLogger(__name__)


def register(subparsers: argparse._SubParsersAction) -> argparse.ArgumentParser:
    parser = subparsers.add_parser("score", help="Score a policy on one system and export its trace")
    add_policy_arguments(parser)
    parser.add_argument("--xi", help="System parameters (default: stage2.real_xi)")
    parser.set_defaults(handler=run)
    return parser


def cmd_score(cfg: RunConfig, policy, label: str, xi: list[float], out: Path) -> tuple[ScoreReport, Path]:
    report = rollout(policy, cfg.plant_spec(xi), cfg.reward_spec(), cfg.eval.initial_state, cfg.eval.horizon)
    path = write_trace_csv(out / f"trace-{label}.csv", report)
    logger.info(
        "Score of %s at xi=%s: %.2f (%s)", label, xi, report.score, "success" if report.success else "failure"
    )
    return report, path


def run(args: argparse.Namespace, cfg: RunConfig, out: Path) -> int:
    policy, label = select_policy(args, cfg, out)
    xi = parse_floats(args.xi, "xi") or cfg.stage2.real_xi
    cmd_score(cfg, policy, label, xi, out)
    return 0
