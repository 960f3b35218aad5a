"""Command-line entry point: simq <command> [options]."""

import argparse
import logging
import os
import sys

from ..errors import ConfigError, ModelFileError, NumericalError, SimQError, SolverError
from . import online, pretrain, score, sweep, surface
from .common import add_common_arguments, resolve_config, run_dir, write_snapshot

logger = logging.getLogger(__name__)

COMMANDS = (pretrain, online, sweep, surface, score)

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_NUMERIC = 2


def create_parser(prog: str = "simq") -> argparse.ArgumentParser:
    """Create the argument parser with one subcommand per pipeline stage.

    Args:
        prog: Program name shown in usage

    Returns:
        Configured parser; each subcommand sets a `handler`
    """
    parser = argparse.ArgumentParser(
        prog=prog,
        description="Pre-train NAF Q-functions on virtual systems and adapt their ensemble online",
    )
    parser.add_argument(
        "--log-level",
        default=os.getenv("SIMQ_LOG_LEVEL", "INFO"),
        choices=["DEBUG", "INFO", "WARNING", "ERROR"],
        help="Logging level (default: $SIMQ_LOG_LEVEL or INFO)",
    )
    subparsers = parser.add_subparsers(dest="command", required=True)
    for command in COMMANDS:
        add_common_arguments(command.register(subparsers))
    return parser


def main(argv: list[str] | None = None) -> int:
    """Run a command and map failures to exit codes.

    Returns:
        0 on success, 1 for configuration or model-file errors, 2 for numerical failures
    """
    args = create_parser().parse_args(argv)
    logging.basicConfig(
        level=getattr(logging, args.log_level),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )

    try:
        cfg = resolve_config(args)
        out = run_dir(args, cfg)
        write_snapshot(out, cfg)
        logger.info("Running %s into %s", args.command, out)
        code = args.handler(args, cfg, out)
    except (ConfigError, ModelFileError) as e:
        logger.error("%s", e)
        return EXIT_CONFIG
    except (NumericalError, SolverError) as e:
        logger.error("Numerical failure: %s", e)
        return EXIT_NUMERIC
    except SimQError as e:
        logger.error("%s", e)
        return EXIT_CONFIG

    logger.info("%s finished", args.command)
    return code


if __name__ == "__main__":
    sys.exit(main())
