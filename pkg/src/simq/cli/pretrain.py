"""pretrain: train one NAF Q-model per virtual system."""

import argparse
import logging
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from ..export import write_training_log
from ..naf import save_model
from ..schemas import RunConfig, learning_rate_for
from ..stage1 import TrainingResult, train
from .common import model_path, parse_list, system_ids, train_log_path

logger = logging.getLogger(__name__)


def register(subparsers: argparse._SubParsersAction) -> argparse.ArgumentParser:
    parser = subparsers.add_parser("pretrain", help="Train member Q-functions on virtual systems")
    parser.add_argument("--systems", help="Comma-separated system ids or presets (default: all configured)")
    parser.add_argument("--workers", type=int, default=1, help="Parallel training processes")
    parser.set_defaults(handler=run)
    return parser


def system_seed(base_seed: int, index: int) -> int:
    """Training seed of the index-th configured virtual system."""
    return int(np.random.SeedSequence([base_seed, index]).generate_state(1)[0])


def train_system(cfg: RunConfig, system_id: str) -> TrainingResult:
    """Train the member for one configured virtual system."""
    index = list(cfg.virtual_systems).index(system_id)
    stage1 = cfg.stage1.model_copy(update={"seed": system_seed(cfg.seed, index)})
    vs = cfg.virtual_systems[system_id]
    logger.info("Training system %s at xi=%s (seed %d)", system_id, vs.xi, stage1.seed)
    return train(cfg.plant_spec(vs.xi), cfg.reward_spec(), stage1, learning_rate_for(cfg, system_id))


def cmd_pretrain(cfg: RunConfig, ids: list[str], out: Path, workers: int = 1) -> list[Path]:
    """Train every requested system and write its model file and training log.

    Returns:
        Paths of the written model files, in id order
    """
    if not ids:
        logger.info("No virtual systems requested")
        return []

    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(train_system, [cfg] * len(ids), ids))
    else:
        results = [train_system(cfg, i) for i in ids]

    written = []
    for system_id, result in zip(ids, results):
        path = model_path(out, system_id)
        path.parent.mkdir(parents=True, exist_ok=True)
        save_model(path, result.model, {"system_id": system_id, "xi": cfg.virtual_systems[system_id].xi})
        write_training_log(train_log_path(out, system_id), result.log)
        logger.info("Saved system %s to %s after %d gradient steps", system_id, path, result.gradient_steps)
        written.append(path)
    return written


def run(args: argparse.Namespace, cfg: RunConfig, out: Path) -> int:
    cmd_pretrain(cfg, system_ids(cfg, parse_list(args.systems)), out, args.workers)
    return 0
