"""Continuous deep Q-learning with a NAF against a simulated virtual system."""

import logging
from dataclasses import dataclass, field

import numpy as np

from .diffnet import AdamState, adam_step
from .errors import BufferUnderflowError, ConfigError, DivergenceError, NumericalError
from .models import EpisodeLog, Experience, ExperienceBatch
from .naf import NafConfig, QModel, batch_loss_and_grad, greedy_action, naf_eval, soft_update
from .plant import DIVERGENCE_NORM, PlantSpec, RewardSpec, clip_action, reward, step
from .schemas import Stage1Config

logger = logging.getLogger(__name__)


class ReplayBuffer:
    """Fixed-capacity FIFO store of experiences with uniform sampling."""

    def __init__(self, capacity: int, state_dim: int, action_dim: int):
        if capacity < 1:
            raise ConfigError(f"Replay buffer capacity must be positive, got {capacity}")
        self.capacity = capacity
        self.inserted = 0
        self._x = np.zeros((capacity, state_dim))
        self._a = np.zeros((capacity, action_dim))
        self._x_next = np.zeros((capacity, state_dim))
        self._r = np.zeros(capacity)

    def __len__(self) -> int:
        return min(self.inserted, self.capacity)

    def push(self, e: Experience) -> None:
        """Store an experience, evicting the oldest once full."""
        i = self.inserted % self.capacity
        self._x[i] = e.x
        self._a[i] = e.a
        self._x_next[i] = e.x_next
        self._r[i] = e.r
        self.inserted += 1

    def sample(self, n: int, rng: np.random.Generator) -> ExperienceBatch:
        """Draw n experiences uniformly with replacement.

        Raises:
            BufferUnderflowError: If the buffer holds fewer than n experiences
        """
        size = len(self)
        if size < n:
            raise BufferUnderflowError(f"Cannot sample {n} experiences from a buffer holding {size}")
        idx = rng.integers(0, size, size=n)
        return ExperienceBatch(
            x=self._x[idx], a=self._a[idx], x_next=self._x_next[idx], r=self._r[idx]
        )

    def contents(self) -> ExperienceBatch:
        """All stored experiences, oldest first."""
        size = len(self)
        order = np.arange(self.inserted - size, self.inserted) % self.capacity
        return ExperienceBatch(
            x=self._x[order], a=self._a[order], x_next=self._x_next[order], r=self._r[order]
        )


@dataclass
class OuState:
    """Discrete Ornstein-Uhlenbeck exploration process.

    eps[k+1] = eps[k] + theta * (mean - eps[k]) + sigma * N(0, 1)
    """

    eps: np.ndarray
    theta: float = 0.15
    mean: float = 0.0
    sigma: float = 0.3

    @classmethod
    def zeros(cls, dim: int, theta: float = 0.15, mean: float = 0.0, sigma: float = 0.3) -> "OuState":
        return cls(eps=np.zeros(dim), theta=theta, mean=mean, sigma=sigma)

    def reset(self) -> None:
        self.eps = np.zeros_like(self.eps)


def ou_step(s: OuState, eps_prime: np.ndarray) -> np.ndarray:
    """Apply the OU recurrence with a given standard-normal draw."""
    s.eps = s.eps + s.theta * (s.mean - s.eps) + s.sigma * np.asarray(eps_prime, dtype=np.float64)
    return s.eps.copy()


def ou_next(s: OuState, rng: np.random.Generator) -> np.ndarray:
    """Advance the OU process and return the new noise vector."""
    return ou_step(s, rng.standard_normal(s.eps.shape))


@dataclass
class TrainingResult:
    """Trained model and per-episode log."""

    model: QModel
    log: list[EpisodeLog] = field(default_factory=list)
    gradient_steps: int = 0
    resets: int = 0


def clip_gradient(grad: np.ndarray, max_norm: float | None) -> np.ndarray:
    """Rescale grad to norm max_norm when it is longer."""
    if max_norm is None:
        return grad
    norm = float(np.linalg.norm(grad))
    if norm <= max_norm:
        return grad
    return grad * (max_norm / norm)


def naf_config_for(spec: PlantSpec, cfg: Stage1Config) -> NafConfig:
    """Network layout and output scaling of a stage-1 member."""
    return NafConfig(
        n_x=spec.state_dim,
        n_a=spec.action_box.dim,
        hidden=tuple(cfg.hidden),
        activation=cfg.activation,
        state_scale=None if cfg.state_scale is None else tuple(cfg.state_scale),
        value_scale=cfg.value_scale,
        diag_limit=cfg.diag_limit,
    )


def train(
    spec: PlantSpec,
    rs: RewardSpec,
    cfg: Stage1Config,
    learning_rate: float | None = None,
) -> TrainingResult:
    """Train a NAF Q-function on one virtual system.

    A state that leaves cfg.reset_bound is stored as experienced, and the
    episode continues from a fresh draw of the initial-state box.

    Args:
        spec: Virtual system
        rs: Reward
        cfg: Training configuration
        learning_rate: Adam step size overriding cfg.learning_rate

    Returns:
        TrainingResult with the final model and the episode log

    Raises:
        DivergenceError: If the loss, gradients, parameters or state become non-finite
    """
    n_x, n_a = spec.state_dim, spec.action_box.dim
    if len(cfg.init_low) != n_x:
        raise ConfigError(f"Initial-state box has {len(cfg.init_low)} coordinates, plant state has {n_x}")

    rng = np.random.default_rng(cfg.seed)
    model = QModel.create(naf_config_for(spec, cfg), seed=cfg.seed)
    step_size = cfg.learning_rate if learning_rate is None else learning_rate
    adam = AdamState.zeros(len(model.main), step_size=step_size)
    buffer = ReplayBuffer(cfg.buffer_capacity, n_x, n_a)
    noise = OuState.zeros(n_a, theta=cfg.ou_theta, mean=cfg.ou_mean, sigma=cfg.ou_sigma)
    warmup = cfg.effective_warmup
    low, high = np.asarray(cfg.init_low), np.asarray(cfg.init_high)
    bound = None if cfg.reset_bound is None else np.asarray(cfg.reset_bound)

    result = TrainingResult(model=model)
    for episode in range(cfg.episodes):
        noise.reset()
        x = rng.uniform(low, high)
        episode_return = 0.0
        losses: list[float] = []

        for _ in range(cfg.steps_per_episode):
            mu = greedy_action(naf_eval(model, "main", x))
            a = clip_action(spec.action_box, mu + ou_next(noise, rng))
            x_next = step(spec, x, a)
            if not np.all(np.isfinite(x_next)) or np.linalg.norm(x_next) > DIVERGENCE_NORM:
                raise DivergenceError(f"Virtual system state diverged in episode {episode}")
            r = reward(rs, x, a)
            buffer.push(Experience(x=x, a=a, x_next=x_next, r=r))
            episode_return += r

            if len(buffer) >= warmup:
                batch = buffer.sample(cfg.batch_size, rng)
                try:
                    loss, grad = batch_loss_and_grad(model, batch, cfg.gamma)
                    main, adam = adam_step(model.main, clip_gradient(grad, cfg.grad_clip), adam)
                except NumericalError as e:
                    raise DivergenceError(f"Training diverged in episode {episode}: {e}") from e
                if not np.isfinite(loss):
                    raise DivergenceError(f"Non-finite loss in episode {episode}")
                model = soft_update(
                    QModel(config=model.config, main=main, target=model.target, seed=model.seed), cfg.tau
                )
                losses.append(loss)
                result.gradient_steps += 1

            if bound is not None and np.any(np.abs(x_next) > bound):
                logger.debug("episode %d: state %s left the reset bound", episode, x_next)
                result.resets += 1
                x = rng.uniform(low, high)
            else:
                x = x_next

        result.log.append(
            EpisodeLog(
                episode=episode,
                episode_return=episode_return,
                mean_loss=float(np.mean(losses)) if losses else 0.0,
                final_state_norm=float(np.linalg.norm(x)),
            )
        )
        if (episode + 1) % cfg.log_every == 0 or episode + 1 == cfg.episodes:
            logger.info(
                "episode %d/%d return=%.2f mean_loss=%.4g |x_K|=%.3f resets=%d",
                episode + 1, cfg.episodes, episode_return, result.log[-1].mean_loss,
                result.log[-1].final_state_norm, result.resets,
            )

    result.model = model
    return result
