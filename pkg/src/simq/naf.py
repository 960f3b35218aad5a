"""Normalized advantage function (NAF) Q-model.

The network output is partitioned as ``[V | mu_raw (n_a) | L entries]`` where
the L entries fill the lower triangle row by row ((0,0), (1,0), (1,1), ...).
Diagonal entries are clamped to [-diag_limit, diag_limit] and exponentiated,
mu = tanh(mu_raw), P = s L L^T, V = s V_raw and

    Q(x, a) = V(x) - 1/2 (a - mu(x))^T P(x) (a - mu(x)).

s is the value scale. The network sees x divided elementwise by the state
scale.
"""

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Literal

import numpy as np

from .diffnet import LayerSpec, NetParams, Tape, backward, forward, init_params, load_network, save_network
from .errors import ConfigError, ModelFileError, NumericalError, ShapeError
from .models import Experience, ExperienceBatch

logger = logging.getLogger(__name__)

Which = Literal["main", "target"]

# exp(20) bounds each diagonal entry of P / s at about 4.9e8.
DIAG_LIMIT = 10.0


@dataclass(frozen=True)
class NafConfig:
    """Dimensions, hidden layout and output scaling of a NAF network."""

    n_x: int
    n_a: int
    hidden: tuple[int, ...] = (64, 64)
    activation: Literal["relu", "tanh"] = "relu"
    state_scale: tuple[float, ...] | None = None
    value_scale: float = 1.0
    diag_limit: float = DIAG_LIMIT

    def __post_init__(self):
        if self.n_x < 1 or self.n_a < 1:
            raise ShapeError(f"State and action dimensions must be positive, got n_x={self.n_x}, n_a={self.n_a}")
        object.__setattr__(self, "hidden", tuple(int(h) for h in self.hidden))
        if self.state_scale is not None:
            scale = tuple(float(s) for s in self.state_scale)
            if len(scale) != self.n_x:
                raise ShapeError(f"state_scale has {len(scale)} entries, state has {self.n_x}")
            if not all(np.isfinite(s) and s > 0.0 for s in scale):
                raise ConfigError(f"state_scale entries must be positive and finite, got {scale}")
            object.__setattr__(self, "state_scale", scale)
        if not (np.isfinite(self.value_scale) and self.value_scale > 0.0):
            raise ConfigError(f"value_scale must be positive and finite, got {self.value_scale}")
        if not (np.isfinite(self.diag_limit) and self.diag_limit > 0.0):
            raise ConfigError(f"diag_limit must be positive and finite, got {self.diag_limit}")

    @property
    def n_tril(self) -> int:
        return self.n_a * (self.n_a + 1) // 2

    @property
    def output_dim(self) -> int:
        return 1 + self.n_a + self.n_tril

    @property
    def tril(self) -> tuple[np.ndarray, np.ndarray]:
        return np.tril_indices(self.n_a)

    def layer_specs(self) -> tuple[LayerSpec, ...]:
        dims = (self.n_x, *self.hidden)
        specs = [LayerSpec(i, o, self.activation) for i, o in zip(dims, dims[1:])]
        specs.append(LayerSpec(dims[-1], self.output_dim, "linear"))
        return tuple(specs)

    def to_meta(self) -> dict:
        return {
            "n_x": self.n_x,
            "n_a": self.n_a,
            "hidden": list(self.hidden),
            "activation": self.activation,
            "state_scale": None if self.state_scale is None else list(self.state_scale),
            "value_scale": self.value_scale,
            "diag_limit": self.diag_limit,
        }

    @classmethod
    def from_meta(cls, meta: dict) -> "NafConfig":
        scale = meta.get("state_scale")
        return cls(
            n_x=int(meta["n_x"]),
            n_a=int(meta["n_a"]),
            hidden=tuple(meta["hidden"]),
            activation=meta.get("activation", "relu"),
            state_scale=None if scale is None else tuple(scale),
            value_scale=float(meta.get("value_scale", 1.0)),
            diag_limit=float(meta.get("diag_limit", DIAG_LIMIT)),
        )

    def network_input(self, x: np.ndarray) -> np.ndarray:
        """States as the network sees them."""
        if self.state_scale is None:
            return x
        return x / np.asarray(self.state_scale)


@dataclass
class NafEval:
    """NAF head outputs at one state."""

    V: float
    mu: np.ndarray
    L: np.ndarray
    P: np.ndarray
    tape: Tape


@dataclass(eq=False)
class QModel:
    """Main and target parameter vectors of one NAF Q-function."""

    config: NafConfig
    main: NetParams
    target: NetParams
    seed: int = 0

    def __post_init__(self):
        if self.main.specs != self.target.specs:
            raise ShapeError("Main and target networks must share layer specs")
        if self.main.specs[-1].out_dim != self.config.output_dim:
            raise ShapeError(
                f"Network has {self.main.out_dim} outputs, NAF head needs {self.config.output_dim}"
            )

    @classmethod
    def create(cls, config: NafConfig, seed: int) -> "QModel":
        """Randomly initialize a model with target = main."""
        main = init_params(config.layer_specs(), seed)
        return cls(config=config, main=main, target=main.copy(), seed=seed)

    def params(self, which: Which) -> NetParams:
        if which == "main":
            return self.main
        if which == "target":
            return self.target
        raise ConfigError(f"Unknown network '{which}'. Valid: main, target")


@dataclass
class _Head:
    """Batched head outputs."""

    V: np.ndarray
    mu: np.ndarray
    L: np.ndarray
    P: np.ndarray
    diag_active: np.ndarray
    tape: Tape = field(repr=False)


def _head(config: NafConfig, params: NetParams, x: np.ndarray) -> _Head:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != config.n_x:
        raise ShapeError(f"Expected states of length {config.n_x}, got shape {x.shape}")
    raw, tape = forward(params, config.network_input(x))
    if not np.all(np.isfinite(raw)):
        raise NumericalError("NAF network produced non-finite outputs")

    n_a = config.n_a
    rows, cols = config.tril
    entries = raw[:, 1 + n_a:]
    diag = rows == cols
    raw_diag = entries[:, diag]

    L = np.zeros((x.shape[0], n_a, n_a))
    L[:, rows, cols] = entries
    L[:, rows[diag], cols[diag]] = np.exp(np.clip(raw_diag, -config.diag_limit, config.diag_limit))
    with np.errstate(over="ignore", invalid="ignore"):
        P = config.value_scale * (L @ L.transpose(0, 2, 1))
    if not np.all(np.isfinite(P)):
        raise NumericalError("P = L L^T overflowed")

    return _Head(
        V=config.value_scale * raw[:, 0],
        mu=np.tanh(raw[:, 1 : 1 + n_a]),
        L=L,
        P=P,
        diag_active=np.abs(raw_diag) < config.diag_limit,
        tape=tape,
    )


def naf_eval(m: QModel, which: Which, x: np.ndarray) -> NafEval:
    """Evaluate V, mu, L and P of the main or target network at state x."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (m.config.n_x,):
        raise ShapeError(f"Expected a state of length {m.config.n_x}, got shape {x.shape}")
    h = _head(m.config, m.params(which), x.reshape(1, -1))
    return NafEval(V=float(h.V[0]), mu=h.mu[0], L=h.L[0], P=h.P[0], tape=h.tape)


def q_value(e: NafEval, a: np.ndarray) -> tuple[float, float]:
    """Return (Q, A) for action a."""
    a = np.atleast_1d(np.asarray(a, dtype=np.float64))
    if a.shape != e.mu.shape:
        raise ShapeError(f"Expected an action of length {e.mu.shape[0]}, got shape {a.shape}")
    d = a - e.mu
    advantage = -0.5 * float(d @ e.P @ d)
    return e.V + advantage, advantage


def greedy_action(e: NafEval) -> np.ndarray:
    """argmax_a Q(x, a), which is mu(x) for a NAF."""
    return e.mu.copy()


def td_target(m: QModel, r: float, x_next: np.ndarray, gamma: float) -> float:
    """r + gamma * V(x') from the target network."""
    _check_gamma(gamma)
    return r + gamma * naf_eval(m, "target", x_next).V


def batch_loss_and_grad(
    m: QModel,
    batch: ExperienceBatch | list[Experience],
    gamma: float,
) -> tuple[float, np.ndarray]:
    """Mean squared TD loss over a minibatch and its gradient w.r.t. the main parameters.

    Targets come from the target network and are treated as constants.
    """
    _check_gamma(gamma)
    if not isinstance(batch, ExperienceBatch):
        if len(batch) == 0:
            raise ShapeError("Minibatch is empty")
        batch = ExperienceBatch.from_experiences(batch)
    n = len(batch)
    if n == 0:
        raise ShapeError("Minibatch is empty")

    cfg = m.config
    targets = batch.r + gamma * _head(cfg, m.target, batch.x_next).V

    h = _head(cfg, m.main, batch.x)
    d = batch.a.reshape(n, cfg.n_a) - h.mu
    u = np.einsum("bji,bj->bi", h.L, d)
    pd = np.einsum("bij,bj->bi", h.P, d)
    s = cfg.value_scale
    q = h.V - 0.5 * s * np.sum(u * u, axis=1)

    resid = targets - q
    loss = float(np.mean(resid * resid))
    dq = -2.0 * resid / n

    # dA/dmu = P d, dA/dL_ij = -s d_i u_j.
    rows, cols = cfg.tril
    diag = rows == cols
    dl_full = -s * dq[:, None, None] * d[:, :, None] * u[:, None, :]
    dl = dl_full[:, rows, cols]
    # The exp on the diagonal contributes a chain factor equal to the diagonal itself; zero where clamped.
    dl[:, diag] *= h.L[:, rows[diag], cols[diag]] * h.diag_active

    dy = np.concatenate(
        [s * dq[:, None], dq[:, None] * pd * (1.0 - h.mu * h.mu), dl],
        axis=1,
    )
    grad, _ = backward(h.tape, dy)
    return loss, grad


def soft_update(m: QModel, tau: float) -> QModel:
    """target <- tau * main + (1 - tau) * target."""
    if not 0.0 < tau <= 1.0:
        raise ConfigError(f"tau must lie in (0, 1], got {tau}")
    data = m.main.data.copy() if tau == 1.0 else tau * m.main.data + (1.0 - tau) * m.target.data
    return QModel(config=m.config, main=m.main, target=m.target.with_data(data), seed=m.seed)


def _check_gamma(gamma: float) -> None:
    if not 0.0 <= gamma < 1.0:
        raise ConfigError(f"gamma must lie in [0, 1), got {gamma}")


# -------------------------------------------------------------------------
# Hand-set members
# -------------------------------------------------------------------------


def analytic_model(
    gains: np.ndarray,
    l_entries: np.ndarray,
    value_weights: np.ndarray | None = None,
    value_offset: float = 0.0,
) -> QModel:
    """Build a QModel with a closed-form head.

    A ReLU layer splits x into [x]+ and [-x]+, and a linear layer combines them into

        V(x) = value_offset - sum_i c_i |x_i|,  mu(x) = tanh(gains @ x),  L = const.

    Args:
        gains: Feedback gains, shape (n_a, n_x)
        l_entries: Raw lower-triangular entries (diagonal in log scale), row-major
        value_weights: c, shape (n_x,), defaults to ones
        value_offset: V at the origin

    Returns:
        QModel whose main and target networks are identical
    """
    gains = np.atleast_2d(np.asarray(gains, dtype=np.float64))
    n_a, n_x = gains.shape
    c = np.ones(n_x) if value_weights is None else np.asarray(value_weights, dtype=np.float64)
    cfg = NafConfig(n_x=n_x, n_a=n_a, hidden=(2 * n_x,), activation="relu")
    l_entries = np.asarray(l_entries, dtype=np.float64).ravel()
    if l_entries.shape != (cfg.n_tril,):
        raise ShapeError(f"Expected {cfg.n_tril} L entries, got {l_entries.shape[0]}")

    w1 = np.vstack([np.eye(n_x), -np.eye(n_x)])
    w2 = np.zeros((cfg.output_dim, 2 * n_x))
    w2[0] = np.concatenate([-c, -c])
    w2[1 : 1 + n_a] = np.hstack([gains, -gains])
    b2 = np.zeros(cfg.output_dim)
    b2[0] = value_offset
    b2[1 + n_a:] = l_entries

    data = np.concatenate([w1.ravel(), np.zeros(2 * n_x), w2.ravel(), b2])
    params = NetParams(cfg.layer_specs(), data)
    return QModel(config=cfg, main=params, target=params.copy(), seed=0)


# -------------------------------------------------------------------------
# Persistence
# -------------------------------------------------------------------------


def save_model(path: str | Path, m: QModel, extra_meta: dict | None = None) -> None:
    """Save a QModel (main and target parameters plus NAF metadata)."""
    meta = {"naf": m.config.to_meta(), **(extra_meta or {})}
    save_network(path, m.main, m.seed, meta=meta, arrays={"target": m.target.data})


def load_model(path: str | Path) -> QModel:
    """Load a QModel written by save_model.

    Raises:
        ModelFileError: If the file is missing, has another version, or lacks NAF metadata
    """
    main, seed, meta, arrays = load_network(path)
    if "naf" not in meta or "target" not in arrays:
        raise ModelFileError(f"Model file {path} does not describe a NAF Q-model")
    try:
        cfg = NafConfig.from_meta(meta["naf"])
        return QModel(config=cfg, main=main, target=main.with_data(arrays["target"]), seed=seed)
    except (ConfigError, NumericalError, ShapeError, KeyError) as e:
        raise ModelFileError(f"Model file {path} is inconsistent: {e}") from e
