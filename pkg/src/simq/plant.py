"""Parametric discrete-time plants and the quadratic stabilization reward."""

import logging
from collections.abc import Callable
from dataclasses import dataclass, field, replace
from typing import Literal

import numpy as np

from .errors import ActionBoxError, ConfigError, NumericalError, ShapeError

logger = logging.getLogger(__name__)

DynamicsFn = Callable[[np.ndarray, np.ndarray, np.ndarray, dict[str, float]], np.ndarray]

# Dynamics families keyed by id. Each maps (x, a, xi, constants) -> x_next.
DYNAMICS: dict[str, DynamicsFn] = {}

PENDULUM_CONSTANTS = {"g": 9.81, "d": 2.0**-4}

# Closed-loop runs abort once the state norm exceeds this.
DIVERGENCE_NORM = 1e6


def register_dynamics(name: str) -> Callable[[DynamicsFn], DynamicsFn]:
    """Register a dynamics family under an id."""

    def decorator(fn: DynamicsFn) -> DynamicsFn:
        DYNAMICS[name] = fn
        return fn

    return decorator


@register_dynamics("pendulum")
def pendulum_step(x: np.ndarray, a: np.ndarray, xi: np.ndarray, constants: dict[str, float]) -> np.ndarray:
    """Damped pendulum with actuator gain xi[1] and damping xi[0]; the origin is upright."""
    g, d = constants["g"], constants["d"]
    return np.array(
        [
            x[0] + d * x[1],
            x[1] + d * (g * np.sin(x[0]) - xi[0] * x[1] + xi[1] * a[0]),
        ]
    )


@dataclass(frozen=True)
class ActionBox:
    """Componentwise closed action interval."""

    low: tuple[float, ...] = (-1.0,)
    high: tuple[float, ...] = (1.0,)

    def __post_init__(self):
        if len(self.low) != len(self.high) or any(lo > hi for lo, hi in zip(self.low, self.high)):
            raise ConfigError(f"Invalid action box {self.low} .. {self.high}")

    @property
    def dim(self) -> int:
        return len(self.low)

    def contains(self, a: np.ndarray) -> bool:
        a = np.atleast_1d(a)
        return bool(np.all(a >= np.asarray(self.low)) and np.all(a <= np.asarray(self.high)))


@dataclass(frozen=True)
class ParamRegion:
    """Box of admissible system parameter vectors."""

    lower: tuple[float, ...] = (0.0, 5.0)
    upper: tuple[float, ...] = (1.0, 50.0)

    def __post_init__(self):
        if len(self.lower) != len(self.upper) or not self.lower:
            raise ConfigError("Parameter region bounds must be nonempty and of equal length")
        if any(lo > hi for lo, hi in zip(self.lower, self.upper)):
            raise ConfigError(f"Empty parameter region {self.lower} .. {self.upper}")

    def contains(self, xi: np.ndarray) -> bool:
        xi = np.asarray(xi, dtype=np.float64)
        if xi.shape != (len(self.lower),):
            return False
        return bool(np.all(xi >= np.asarray(self.lower)) and np.all(xi <= np.asarray(self.upper)))


@dataclass(frozen=True, eq=False)
class PlantSpec:
    """A dynamics family evaluated at a particular system parameter vector."""

    xi: np.ndarray
    dynamics: str = "pendulum"
    constants: dict[str, float] = field(default_factory=lambda: dict(PENDULUM_CONSTANTS))
    state_dim: int = 2
    action_box: ActionBox = field(default_factory=ActionBox)
    target: np.ndarray = field(default_factory=lambda: np.zeros(2))
    region: ParamRegion | None = field(default_factory=ParamRegion)

    def __post_init__(self):
        object.__setattr__(self, "xi", np.asarray(self.xi, dtype=np.float64))
        object.__setattr__(self, "target", np.asarray(self.target, dtype=np.float64))
        if self.dynamics not in DYNAMICS:
            raise ConfigError(f"Unknown dynamics '{self.dynamics}'. Registered: {', '.join(sorted(DYNAMICS))}")
        if self.target.shape != (self.state_dim,):
            raise ShapeError(f"Target state must have length {self.state_dim}")
        if self.region is not None and not self.region.contains(self.xi):
            raise ConfigError(f"xi={self.xi.tolist()} lies outside {self.region.lower} .. {self.region.upper}")

    def with_xi(self, xi: np.ndarray) -> "PlantSpec":
        return replace(self, xi=np.asarray(xi, dtype=np.float64))


@dataclass(frozen=True, eq=False)
class RewardSpec:
    """Quadratic stabilization reward -(x-x*)^T R1 (x-x*) - a^T R2 a."""

    R1: np.ndarray
    R2: np.ndarray
    target: np.ndarray

    def __post_init__(self):
        for name in ("R1", "R2", "target"):
            object.__setattr__(self, name, np.atleast_1d(np.asarray(getattr(self, name), dtype=np.float64)))
        object.__setattr__(self, "R1", np.atleast_2d(self.R1))
        object.__setattr__(self, "R2", np.atleast_2d(self.R2))
        for name in ("R1", "R2"):
            if not is_spd(getattr(self, name)):
                raise ConfigError(f"{name} must be symmetric positive definite")
        if self.R1.shape[0] != self.target.shape[0]:
            raise ShapeError("R1 and the target state disagree on the state dimension")

    @classmethod
    def benchmark(cls) -> "RewardSpec":
        return cls(R1=np.diag([1.0, 0.1]), R2=np.array([[10.0]]), target=np.zeros(2))


def is_spd(m: np.ndarray) -> bool:
    """True if m is square, symmetric and positive definite."""
    m = np.atleast_2d(np.asarray(m, dtype=np.float64))
    if m.ndim != 2 or m.shape[0] != m.shape[1] or not np.allclose(m, m.T, rtol=0.0, atol=1e-12):
        return False
    try:
        np.linalg.cholesky(m)
    except np.linalg.LinAlgError:
        return False
    return True


def step(spec: PlantSpec, x: np.ndarray, a: np.ndarray) -> np.ndarray:
    """Advance the plant by one step. The caller clips a into the action box first."""
    x = np.asarray(x, dtype=np.float64)
    a = np.atleast_1d(np.asarray(a, dtype=np.float64))
    if x.shape != (spec.state_dim,):
        raise ShapeError(f"Expected a state of length {spec.state_dim}, got shape {x.shape}")
    if a.shape != (spec.action_box.dim,):
        raise ShapeError(f"Expected an action of length {spec.action_box.dim}, got shape {a.shape}")
    if not np.all(np.isfinite(x)):
        raise NumericalError("Plant state contains non-finite values")
    if not spec.action_box.contains(a):
        raise ActionBoxError(f"Action {a.tolist()} outside {spec.action_box.low} .. {spec.action_box.high}")
    return DYNAMICS[spec.dynamics](x, a, spec.xi, spec.constants)


def reward(rs: RewardSpec, x: np.ndarray, a: np.ndarray) -> float:
    """Quadratic reward; zero only at (x*, 0)."""
    e = np.asarray(x, dtype=np.float64) - rs.target
    a = np.atleast_1d(np.asarray(a, dtype=np.float64))
    if e.shape[0] != rs.R1.shape[0] or a.shape[0] != rs.R2.shape[0]:
        raise ShapeError("State or action length does not match the reward matrices")
    return -float(e @ rs.R1 @ e) - float(a @ rs.R2 @ a)


def clip_action(box: ActionBox, a: np.ndarray) -> np.ndarray:
    """Clamp an action into the box."""
    return np.clip(np.atleast_1d(np.asarray(a, dtype=np.float64)), box.low, box.high)


# -------------------------------------------------------------------------
# Slowly varying parameters
# -------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class XiSchedule:
    """Linear ramp of xi from start to end over horizon steps, constant afterwards."""

    start: np.ndarray
    end: np.ndarray
    horizon: int = 200

    def __post_init__(self):
        object.__setattr__(self, "start", np.asarray(self.start, dtype=np.float64))
        object.__setattr__(self, "end", np.asarray(self.end, dtype=np.float64))
        if self.start.shape != self.end.shape:
            raise ShapeError("Schedule endpoints must have the same length")
        if self.horizon < 1:
            raise ConfigError("Schedule horizon must be positive")

    @classmethod
    def constant(cls, xi: np.ndarray) -> "XiSchedule":
        return cls(start=xi, end=xi, horizon=1)

    @classmethod
    def preset(cls, name: Literal["up", "down"], xi1: float = 1.0, horizon: int = 200) -> "XiSchedule":
        """The increasing (5 -> 50) or decreasing (50 -> 5) xi2 ramps with xi1 held fixed."""
        if name == "up":
            return cls(start=(xi1, 5.0), end=(xi1, 50.0), horizon=horizon)
        if name == "down":
            return cls(start=(xi1, 50.0), end=(xi1, 5.0), horizon=horizon)
        raise ConfigError(f"Unknown schedule '{name}'. Valid: up, down")


def schedule_xi(profile: XiSchedule, k: int) -> np.ndarray:
    """xi at step k."""
    if k >= profile.horizon:
        return profile.end.copy()
    frac = max(k, 0) / profile.horizon
    return profile.start + (profile.end - profile.start) * frac
