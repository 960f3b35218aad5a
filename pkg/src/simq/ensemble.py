"""Linear Q-ensemble over pre-trained NAF members and its online weight adaptation.

Q(x, a | w) = sum_j w_j Q_j(x, a) with w on the probability simplex. Since
every member advantage is a concave quadratic in a, so is the ensemble, and
its maximizer solves (sum_m w_m P_m) a = sum_j w_j P_j mu_j.
"""

import logging
from collections.abc import Sequence
from dataclasses import dataclass, replace
from typing import Literal

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve

from .errors import ConfigError, DivergenceError, ShapeError, SolverError
from .models import Experience, OnlineLog, OnlineRecord
from .naf import NafEval, QModel, naf_eval, q_value
from .plant import DIVERGENCE_NORM, PlantSpec, RewardSpec, XiSchedule, clip_action, reward, schedule_xi, step

logger = logging.getLogger(__name__)

NoiseKind = Literal["decay", "norm-gated", "none"]
Positivity = Literal["strict", "nonnegative"]


@dataclass(eq=False)
class QEnsemble:
    """Frozen member Q-models and their simplex weights."""

    members: tuple[QModel, ...]
    weights: np.ndarray
    eta: float = 1.0e-7
    eps_w: float = 1.0e-9
    alpha: float = 5.0e-5
    gamma: float = 0.99
    max_halvings: int = 60
    positivity: Positivity = "strict"

    def __post_init__(self):
        self.members = tuple(self.members)
        self.weights = np.asarray(self.weights, dtype=np.float64)
        if not self.members:
            raise ConfigError("An ensemble needs at least one member")
        dims = {(m.config.n_x, m.config.n_a) for m in self.members}
        if len(dims) != 1:
            raise ShapeError(f"Members disagree on (n_x, n_a): {sorted(dims)}")
        if self.weights.shape != (len(self.members),):
            raise ShapeError(f"Expected {len(self.members)} weights, got shape {self.weights.shape}")
        if not 0.0 <= self.gamma < 1.0:
            raise ConfigError(f"gamma must lie in [0, 1), got {self.gamma}")

    @classmethod
    def uniform(cls, members: Sequence[QModel], **kwargs) -> "QEnsemble":
        """Ensemble with w_j = 1/N."""
        n = len(members)
        return cls(members=tuple(members), weights=np.full(n, 1.0 / n), **kwargs)

    @property
    def size(self) -> int:
        return len(self.members)

    @property
    def n_a(self) -> int:
        return self.members[0].config.n_a

    def with_weights(self, weights: np.ndarray) -> "QEnsemble":
        return replace(self, weights=np.asarray(weights, dtype=np.float64))


def member_evals(E: QEnsemble, x: np.ndarray) -> list[NafEval]:
    """Main-network head outputs of every member at x, in member order."""
    return [naf_eval(m, "main", x) for m in E.members]


def _member_q(evals: list[NafEval], a: np.ndarray) -> np.ndarray:
    return np.array([q_value(e, a)[0] for e in evals])


def ensemble_q(E: QEnsemble, x: np.ndarray, a: np.ndarray) -> float:
    """sum_j w_j Q_j(x, a)."""
    return float(E.weights @ _member_q(member_evals(E, x), a))


def _greedy_from_evals(weights: np.ndarray, evals: list[NafEval]) -> np.ndarray:
    active = np.flatnonzero(weights)
    if active.size == 1:
        return evals[active[0]].mu.copy()

    hessian = sum(w * e.P for w, e in zip(weights, evals))
    rhs = sum(w * (e.P @ e.mu) for w, e in zip(weights, evals))
    try:
        factor = cho_factor(hessian, lower=True)
        action = cho_solve(factor, rhs)
    except (LinAlgError, ValueError) as e:
        raise SolverError(f"Weighted P matrix is not positive definite or not finite: {e}") from e
    if not np.all(np.isfinite(action)):
        raise SolverError("Greedy action solve produced non-finite values")
    return action


def greedy_action(E: QEnsemble, x: np.ndarray) -> np.ndarray:
    """argmax_a Q(x, a | w) in closed form.

    A single nonzero weight returns that member's mu unchanged.
    """
    return _greedy_from_evals(E.weights, member_evals(E, x))


def _td_terms(E: QEnsemble, e: Experience) -> tuple[float, float, np.ndarray]:
    evals_next = member_evals(E, np.asarray(e.x_next, dtype=np.float64))
    a_next = _greedy_from_evals(E.weights, evals_next)
    t = e.r + E.gamma * float(E.weights @ _member_q(evals_next, a_next))

    q_members = _member_q(member_evals(E, np.asarray(e.x, dtype=np.float64)), np.atleast_1d(e.a))
    delta = t - float(E.weights @ q_members)
    return delta, t, q_members


def td_error(E: QEnsemble, e: Experience) -> tuple[float, float]:
    """(delta, t) with t = r + gamma * max_a' Q(x', a' | w), held constant."""
    delta, t, _ = _td_terms(E, e)
    return delta, t


def grad_w(E: QEnsemble, e: Experience) -> np.ndarray:
    """Semi-gradient of 1/2 (t - Q(x, a | w))^2 with respect to w."""
    delta, _, q_members = _td_terms(E, e)
    return -delta * q_members


def barrier(w: np.ndarray, eps_w: float) -> float:
    """-sum_j log(w_j + eps_w)."""
    shifted = _barrier_arg(w, eps_w)
    return -float(np.sum(np.log(shifted)))


def barrier_grad(w: np.ndarray, eps_w: float) -> np.ndarray:
    """Gradient of the log barrier, -1 / (w_j + eps_w)."""
    return -1.0 / _barrier_arg(w, eps_w)


def _barrier_arg(w: np.ndarray, eps_w: float) -> np.ndarray:
    shifted = np.asarray(w, dtype=np.float64) + eps_w
    if np.any(shifted <= 0.0):
        raise ConfigError(f"Barrier undefined: some w_j <= -eps_w ({eps_w})")
    return shifted


@dataclass
class WeightUpdate:
    """Outcome of one constrained weight update."""

    weights: np.ndarray
    halvings: int
    delta: float
    skipped: bool = False


def halve_until_positive(
    w: np.ndarray,
    direction: np.ndarray,
    alpha: float,
    max_halvings: int = 60,
    positivity: Positivity = "strict",
) -> tuple[np.ndarray | None, int]:
    """Find the smallest l with w - alpha 2^-l direction admissible, then normalize.

    Returns:
        (normalized weights, l), or (None, max_halvings + 1) when no l <= max_halvings works
    """
    for l in range(max_halvings + 1):
        candidate = w - alpha * 2.0**-l * direction
        ok = np.all(candidate > 0.0) if positivity == "strict" else np.all(candidate >= 0.0)
        if ok and candidate.sum() > 0.0:
            return candidate / candidate.sum(), l
    return None, max_halvings + 1


def update_weights(E: QEnsemble, e: Experience) -> WeightUpdate:
    """One barrier-regularized Q-learning step on w, kept on the simplex."""
    delta, _, q_members = _td_terms(E, e)
    direction = -delta * q_members + E.eta * barrier_grad(E.weights, E.eps_w)
    weights, halvings = halve_until_positive(E.weights, direction, E.alpha, E.max_halvings, E.positivity)
    if weights is None:
        logger.warning("Weight update skipped after %d halvings (delta=%.4g)", E.max_halvings, delta)
        return WeightUpdate(weights=E.weights.copy(), halvings=halvings, delta=delta, skipped=True)
    return WeightUpdate(weights=weights, halvings=halvings, delta=delta)


# -------------------------------------------------------------------------
# Exploration and the online loop
# -------------------------------------------------------------------------


@dataclass(frozen=True)
class NoiseSchedule:
    """Exploration noise for online adaptation.

    decay: scale * max(horizon - k, 0) / horizon * N(0, 1)
    norm-gated: scale * N(0, 1) while ||x|| >= gate, else 0
    """

    kind: NoiseKind = "decay"
    scale: float = 0.1
    horizon: int = 400
    gate: float = 0.05


def exploration_noise(
    schedule: NoiseSchedule, k: int, x: np.ndarray, rng: np.random.Generator, n_a: int = 1
) -> np.ndarray:
    """Noise to add to the greedy action at step k."""
    if schedule.kind == "decay":
        factor = schedule.scale * max(schedule.horizon - k, 0) / schedule.horizon
        if factor == 0.0:
            return np.zeros(n_a)
        return factor * rng.standard_normal(n_a)
    if schedule.kind == "norm-gated":
        if np.linalg.norm(x) < schedule.gate:
            return np.zeros(n_a)
        return schedule.scale * rng.standard_normal(n_a)
    if schedule.kind == "none":
        return np.zeros(n_a)
    raise ConfigError(f"Unknown noise kind '{schedule.kind}'. Valid: decay, norm-gated, none")


@dataclass
class OnlineResult:
    """Log and final weights of an online run."""

    log: OnlineLog
    final_weights: np.ndarray
    skipped_updates: int = 0

    @property
    def score(self) -> float:
        return self.log.total_reward


def online_run(
    E: QEnsemble,
    plant: PlantSpec,
    rs: RewardSpec,
    noise: NoiseSchedule,
    steps: int,
    x0: np.ndarray,
    rng: np.random.Generator,
    schedule: XiSchedule | None = None,
) -> OnlineResult:
    """Adapt the ensemble weights online on the real system.

    Args:
        E: Ensemble with initial weights w[0]
        plant: Real system (its xi is replaced per step when schedule is given)
        rs: Reward
        noise: Exploration noise schedule
        steps: Number of steps K (k = 0 .. K-1)
        x0: Initial state
        rng: Noise generator
        schedule: Optional slowly varying xi

    Raises:
        DivergenceError: If ||x|| exceeds the divergence bound
    """
    x = np.asarray(x0, dtype=np.float64).copy()
    log = OnlineLog()
    skipped = 0

    for k in range(steps):
        plant_k = plant if schedule is None else plant.with_xi(schedule_xi(schedule, k))
        greedy = greedy_action(E, x)
        a = clip_action(plant.action_box, greedy + exploration_noise(noise, k, x, rng, E.n_a))
        x_next = step(plant_k, x, a)
        r = reward(rs, x, a)

        update = update_weights(E, Experience(x=x, a=a, x_next=x_next, r=r))
        skipped += int(update.skipped)
        E = E.with_weights(update.weights)
        log.append(
            OnlineRecord(k=k, x=x, a=a, r=r, abs_delta=abs(update.delta), w=update.weights, halvings=update.halvings)
        )
        logger.debug("k=%d |x|=%.4f a=%s w=%s", k, np.linalg.norm(x), a, update.weights)

        if not np.all(np.isfinite(x_next)) or np.linalg.norm(x_next) > DIVERGENCE_NORM:
            raise DivergenceError(f"Real system diverged at step {k}")
        x = x_next

    return OnlineResult(log=log, final_weights=E.weights.copy(), skipped_updates=skipped)
