"""surface: greedy actions of a member or the ensemble over a state grid."""

import argparse
import logging
from pathlib import Path

from ..evalkit import EnsemblePolicy, MemberPolicy, PolicySurface, policy_surface
from ..export import write_surface_csv
from ..naf import load_model
from ..schemas import RunConfig
from .common import basis_ids, build_ensemble, load_members, model_path, parse_floats, parse_list

logger = logging.getLogger(__name__)


def register(subparsers: argparse._SubParsersAction) -> argparse.ArgumentParser:
    parser = subparsers.add_parser("surface", help="Export a policy surface")
    add_policy_arguments(parser)
    parser.set_defaults(handler=run)
    return parser


def add_policy_arguments(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--member", help="Member id (default: the ensemble over --basis)")
    parser.add_argument("--basis", help="Comma-separated member ids or a case preset (default: config basis)")
    parser.add_argument("--weights", help="Ensemble weights, comma-separated (default: uniform)")


def select_policy(args: argparse.Namespace, cfg: RunConfig, out: Path) -> tuple[MemberPolicy | EnsemblePolicy, str]:
    """Policy named by --member or --basis/--weights, with a label for file names."""
    if args.member is not None:
        member = basis_ids(cfg, [args.member])[0]
        return MemberPolicy(load_model(model_path(out, member))), f"member-{member}"
    ids = basis_ids(cfg, parse_list(args.basis))
    ensemble = build_ensemble(cfg, load_members(out, ids), parse_floats(args.weights, "weights"))
    return EnsemblePolicy(ensemble), "ensemble"


def cmd_surface(cfg: RunConfig, policy, label: str, out: Path) -> tuple[PolicySurface, Path]:
    x1, x2 = cfg.eval.surface_axes()
    surface = policy_surface(policy, x1, x2)
    path = write_surface_csv(out / f"surface-{label}.csv", surface)
    return surface, path


def run(args: argparse.Namespace, cfg: RunConfig, out: Path) -> int:
    policy, label = select_policy(args, cfg, out)
    cmd_surface(cfg, policy, label, out)
    return 0
