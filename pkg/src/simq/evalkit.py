"""Policy scoring, parameter-grid sweeps and policy surfaces."""

import logging
import math
from collections.abc import Callable, Sequence
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .ensemble import NoiseSchedule, QEnsemble, greedy_action as ensemble_greedy, online_run
from .errors import ConfigError, NumericalError, ShapeError, SolverError
from .models import SUCCESS_THRESHOLD, ScoreReport, SweepGrid
from .naf import QModel, greedy_action as member_greedy, naf_eval
from .plant import DIVERGENCE_NORM, PlantSpec, RewardSpec, clip_action, reward, step

logger = logging.getLogger(__name__)

Policy = Callable[[np.ndarray], np.ndarray]

DEFAULT_INITIAL_STATE = (math.pi, 0.0)
DEFAULT_HORIZON = 1000


@dataclass(eq=False)
class MemberPolicy:
    """Greedy policy mu(x) of one pre-trained Q-model."""

    model: QModel

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return member_greedy(naf_eval(self.model, "main", x))


@dataclass(eq=False)
class EnsemblePolicy:
    """Greedy policy of an ensemble at fixed weights."""

    ensemble: QEnsemble

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return ensemble_greedy(self.ensemble, x)


def rollout(
    policy: Policy,
    plant: PlantSpec,
    rs: RewardSpec,
    x0: Sequence[float] = DEFAULT_INITIAL_STATE,
    horizon: int = DEFAULT_HORIZON,
) -> ScoreReport:
    """Noiseless closed-loop trajectory over k = 0 .. horizon with its score.

    The score sums the rewards of all horizon + 1 state-action pairs. A
    non-finite or diverging state, or a policy that fails numerically, ends
    the rollout with score -inf.
    """
    x = np.asarray(x0, dtype=np.float64).copy()
    states, actions, rewards = [], [], []
    diverged = False

    for k in range(horizon + 1):
        try:
            a = clip_action(plant.action_box, policy(x))
        except (NumericalError, SolverError) as e:
            logger.warning("Policy failed at step %d for xi=%s: %s", k, plant.xi.tolist(), e)
            diverged = True
            break
        states.append(x)
        actions.append(a)
        rewards.append(reward(rs, x, a))
        if k == horizon:
            break
        x = step(plant, x, a)
        if not np.all(np.isfinite(x)) or np.linalg.norm(x) > DIVERGENCE_NORM:
            logger.warning("Rollout diverged at step %d for xi=%s", k + 1, plant.xi.tolist())
            diverged = True
            break

    score = -math.inf if diverged else float(np.sum(rewards))
    return ScoreReport(
        xi=plant.xi.copy(),
        score=score,
        success=score >= SUCCESS_THRESHOLD,
        steps=len(rewards),
        diverged=diverged,
        states=np.array(states),
        actions=np.array(actions),
        rewards=np.array(rewards),
    )


def score(
    policy: Policy,
    plant: PlantSpec,
    rs: RewardSpec,
    x0: Sequence[float] = DEFAULT_INITIAL_STATE,
    horizon: int = DEFAULT_HORIZON,
) -> ScoreReport:
    """Score of a deterministic policy on one system; the trajectory is dropped."""
    report = rollout(policy, plant, rs, x0, horizon)
    report.states = report.actions = report.rewards = None
    return report


# -------------------------------------------------------------------------
# Sweeps
# -------------------------------------------------------------------------


@dataclass(eq=False)
class PolicyScorer:
    """Scores a frozen policy in each cell."""

    policy: Policy
    rs: RewardSpec
    x0: tuple[float, ...] = DEFAULT_INITIAL_STATE
    horizon: int = DEFAULT_HORIZON

    def __call__(self, plant: PlantSpec, seed: int) -> float:
        return score(self.policy, plant, self.rs, self.x0, self.horizon).score


@dataclass(eq=False)
class OnlineLearnerScorer:
    """Runs online adaptation from uniform weights in each cell and reports its reward sum."""

    members: tuple[QModel, ...]
    rs: RewardSpec
    noise: NoiseSchedule = field(default_factory=NoiseSchedule)
    steps: int = DEFAULT_HORIZON + 1
    x0: tuple[float, ...] = DEFAULT_INITIAL_STATE
    ensemble_options: dict = field(default_factory=dict)

    def __call__(self, plant: PlantSpec, seed: int) -> float:
        ensemble = QEnsemble.uniform(self.members, **self.ensemble_options)
        rng = np.random.default_rng(seed)
        try:
            result = online_run(ensemble, plant, self.rs, self.noise, self.steps, np.asarray(self.x0), rng)
        except (NumericalError, SolverError) as e:
            logger.warning("Online run failed for xi=%s: %s", plant.xi.tolist(), e)
            return -math.inf
        return result.score


CellScorer = Callable[[PlantSpec, int], float]


def cell_seed(base_seed: int, i: int, j: int) -> int:
    """Seed of grid cell (i, j), independent of evaluation order."""
    return int(np.random.SeedSequence([base_seed, i, j]).generate_state(1)[0])


def evaluate_cell(scorer: CellScorer, plant: PlantSpec, xi: tuple[float, float], seed: int) -> float:
    return float(scorer(plant.with_xi(np.asarray(xi, dtype=np.float64)), seed))


def sweep(
    scorer: CellScorer,
    plant: PlantSpec,
    xi1_values: Sequence[float],
    xi2_values: Sequence[float],
    base_seed: int = 0,
    workers: int | None = None,
    order: Sequence[tuple[int, int]] | None = None,
) -> SweepGrid:
    """Score every (xi1, xi2) cell independently.

    Args:
        scorer: Cell scorer taking (plant, seed)
        plant: Template plant; each cell replaces its xi
        xi1_values: Row values
        xi2_values: Column values
        base_seed: Seed from which per-cell seeds are derived
        workers: Process count; None or 1 evaluates in this process
        order: Optional evaluation order of (i, j) cells

    Returns:
        SweepGrid with scores[i, j] for (xi1_values[i], xi2_values[j])
    """
    xi1 = np.asarray(xi1_values, dtype=np.float64)
    xi2 = np.asarray(xi2_values, dtype=np.float64)
    if xi1.size == 0 or xi2.size == 0:
        raise ConfigError("Sweep grid must be nonempty")

    cells = list(order) if order is not None else [(i, j) for i in range(xi1.size) for j in range(xi2.size)]
    seeds = np.array([[cell_seed(base_seed, i, j) for j in range(xi2.size)] for i in range(xi1.size)], dtype=np.uint64)
    args = [(scorer, plant, (xi1[i], xi2[j]), int(seeds[i, j])) for i, j in cells]

    logger.info("Sweeping %d cells with %s worker(s)", len(cells), workers or 1)
    if workers and workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            values = list(pool.map(evaluate_cell, *zip(*args)))
    else:
        values = [evaluate_cell(*a) for a in args]

    scores = np.full((xi1.size, xi2.size), np.nan)
    for (i, j), v in zip(cells, values):
        scores[i, j] = v
    return SweepGrid(xi1_values=xi1, xi2_values=xi2, scores=scores, seeds=seeds)


@dataclass
class PolicySurface:
    """Greedy actions over a rectangular state grid, actions[i, j] at (x1[i], x2[j])."""

    x1_values: np.ndarray
    x2_values: np.ndarray
    actions: np.ndarray


def policy_surface(policy: Policy, x1_values: Sequence[float], x2_values: Sequence[float]) -> PolicySurface:
    """Evaluate a policy on a two-dimensional state grid.

    Returns:
        PolicySurface whose actions have shape (len(x1_values), len(x2_values), n_a)
    """
    x1 = np.asarray(x1_values, dtype=np.float64)
    x2 = np.asarray(x2_values, dtype=np.float64)
    if x1.ndim != 1 or x2.ndim != 1:
        raise ShapeError("Surface axes must be one-dimensional")
    actions = np.array([[np.atleast_1d(policy(np.array([a, b]))) for b in x2] for a in x1])
    return PolicySurface(x1_values=x1, x2_values=x2, actions=actions.reshape(x1.size, x2.size, -1))
