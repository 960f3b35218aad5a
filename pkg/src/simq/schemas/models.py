"""Pydantic models for run configuration files."""

import math
from typing import Literal

import numpy as np
from pydantic import BaseModel, Field, field_validator, model_validator

from ..plant import ActionBox, ParamRegion, PlantSpec, RewardSpec, XiSchedule, is_spd


# Stage 1
class Stage1Config(BaseModel):
    """Continuous deep Q-learning against one virtual system."""

    episodes: int = Field(default=500, ge=0, description="Number of training episodes")
    steps_per_episode: int = Field(default=200, ge=1, description="Environment steps per episode (K)")
    batch_size: int = Field(default=128, ge=1, description="Minibatch size (I)")
    gamma: float = Field(default=0.99, description="Discount factor")
    tau: float = Field(default=0.005, description="Soft target update rate")
    learning_rate: float = Field(default=5e-4, gt=0, description="Adam step size")
    hidden: list[int] = Field(default_factory=lambda: [64, 64], min_length=1, description="Hidden layer widths")
    activation: Literal["relu", "tanh"] = Field(default="relu", description="Hidden activation")
    buffer_capacity: int = Field(default=1_000_000, ge=1, description="Replay buffer capacity")
    warmup: int | None = Field(
        default=None, ge=1, description="Experiences required before the first update (defaults to batch_size)"
    )
    init_low: list[float] = Field(default_factory=lambda: [-math.pi, -8.0], description="Initial-state box lower corner")
    init_high: list[float] = Field(default_factory=lambda: [math.pi, 8.0], description="Initial-state box upper corner")
    ou_theta: float = Field(default=0.15, description="OU mean reversion rate (p1)")
    ou_mean: float = Field(default=0.0, description="OU mean (p2)")
    ou_sigma: float = Field(default=0.3, description="OU noise scale (p3)")
    state_scale: list[float] | None = Field(
        default_factory=lambda: [math.pi, 8.0], description="Per-coordinate divisor of network inputs"
    )
    value_scale: float = Field(default=100.0, gt=0, description="Multiplier of V and P on the network outputs")
    diag_limit: float = Field(default=10.0, gt=0, description="Clamp of the log-scale diagonal of L")
    grad_clip: float | None = Field(default=10.0, gt=0, description="Gradient norm bound (None disables clipping)")
    reset_bound: list[float] | None = Field(
        default_factory=lambda: [3.0 * math.pi, 20.0],
        description="Per-coordinate |x| bound; leaving it restarts the state from the initial box",
    )
    seed: int = Field(default=0, description="Seed of the training run")
    log_every: int = Field(default=10, ge=1, description="Episodes between progress log lines")

    @field_validator("gamma")
    @classmethod
    def _gamma_range(cls, v: float) -> float:
        if not 0.0 < v < 1.0:
            raise ValueError("gamma must lie in (0, 1)")
        return v

    @field_validator("tau")
    @classmethod
    def _tau_range(cls, v: float) -> float:
        if not 0.0 < v <= 1.0:
            raise ValueError("tau must lie in (0, 1]")
        return v

    @model_validator(mode="after")
    def _init_box(self) -> "Stage1Config":
        if len(self.init_low) != len(self.init_high) or any(lo > hi for lo, hi in zip(self.init_low, self.init_high)):
            raise ValueError("init_low/init_high must describe a nonempty box")
        n_x = len(self.init_low)
        if self.state_scale is not None and (len(self.state_scale) != n_x or min(self.state_scale) <= 0):
            raise ValueError(f"state_scale must hold {n_x} positive values")
        if self.reset_bound is not None:
            if len(self.reset_bound) != n_x:
                raise ValueError(f"reset_bound must hold {n_x} values")
            if any(b < max(abs(lo), abs(hi)) for b, lo, hi in zip(self.reset_bound, self.init_low, self.init_high)):
                raise ValueError("reset_bound must contain the initial-state box")
        return self

    @property
    def effective_warmup(self) -> int:
        return max(self.batch_size, self.warmup or self.batch_size)


class VirtualSystemConfig(BaseModel):
    """A virtual system: assumed xi plus its stage-1 Adam step size."""

    xi: list[float] = Field(description="Assumed system parameter vector")
    learning_rate: float | None = Field(default=None, gt=0, description="Adam step size override")


# Plant and reward
class PlantConfig(BaseModel):
    """Dynamics family and admissible parameter region."""

    dynamics: str = Field(default="pendulum", description="Registered dynamics id")
    constants: dict[str, float] = Field(
        default_factory=lambda: {"g": 9.81, "d": 2.0**-4}, description="Fixed constants of the dynamics"
    )
    state_dim: int = Field(default=2, ge=1, description="State dimension")
    action_low: list[float] = Field(default_factory=lambda: [-1.0], description="Action box lower corner")
    action_high: list[float] = Field(default_factory=lambda: [1.0], description="Action box upper corner")
    target: list[float] = Field(default_factory=lambda: [0.0, 0.0], description="Target state x*")
    xi_lower: list[float] = Field(default_factory=lambda: [0.0, 5.0], description="Parameter region lower corner")
    xi_upper: list[float] = Field(default_factory=lambda: [1.0, 50.0], description="Parameter region upper corner")

    def region(self) -> ParamRegion:
        return ParamRegion(tuple(self.xi_lower), tuple(self.xi_upper))

    def action_box(self) -> ActionBox:
        return ActionBox(tuple(self.action_low), tuple(self.action_high))

    def spec(self, xi: list[float] | np.ndarray) -> PlantSpec:
        return PlantSpec(
            xi=np.asarray(xi, dtype=np.float64),
            dynamics=self.dynamics,
            constants=dict(self.constants),
            state_dim=self.state_dim,
            action_box=self.action_box(),
            target=np.asarray(self.target, dtype=np.float64),
            region=self.region(),
        )


class RewardConfig(BaseModel):
    """Reward matrices."""

    R1: list[list[float]] = Field(default_factory=lambda: [[1.0, 0.0], [0.0, 0.1]], description="State weight")
    R2: list[list[float]] = Field(default_factory=lambda: [[10.0]], description="Action weight")

    @field_validator("R1", "R2")
    @classmethod
    def _positive_definite(cls, v: list[list[float]]) -> list[list[float]]:
        if not is_spd(np.asarray(v, dtype=np.float64)):
            raise ValueError("reward matrices must be symmetric positive definite")
        return v

    def spec(self, target: list[float]) -> RewardSpec:
        return RewardSpec(R1=np.asarray(self.R1), R2=np.asarray(self.R2), target=np.asarray(target))


# Stage 2
class NoiseConfig(BaseModel):
    """Exploration noise added during online adaptation."""

    kind: Literal["decay", "norm-gated", "none"] = Field(default="decay", description="Noise schedule")
    scale: float = Field(default=0.1, ge=0, description="Multiplier of the standard normal draw")
    horizon: int = Field(default=400, ge=1, description="Steps until decayed noise reaches zero")
    gate: float = Field(default=0.05, ge=0, description="State norm below which gated noise is off")


class Stage2Config(BaseModel):
    """Online adaptation of the ensemble weights on the real system."""

    basis: list[str] = Field(default_factory=lambda: ["1", "2", "3", "4"], min_length=1, description="Member ids")
    eta: float = Field(default=1e-7, ge=0, description="Barrier coefficient")
    eps_w: float = Field(default=1e-9, gt=0, description="Barrier floor")
    alpha: float = Field(default=5e-5, gt=0, description="Base step size")
    gamma: float = Field(default=0.99, ge=0, lt=1, description="Discount factor")
    max_halvings: int = Field(default=60, ge=0, description="Step halvings before an update is skipped")
    positivity: Literal["strict", "nonnegative"] = Field(default="strict", description="Halving acceptance test")
    noise: NoiseConfig = Field(default_factory=NoiseConfig, description="Exploration noise")
    steps: int = Field(default=1001, ge=0, description="Online steps (k = 0 .. steps-1)")
    initial_state: list[float] = Field(default_factory=lambda: [math.pi, 0.0], description="x[0]")
    real_xi: list[float] = Field(default_factory=lambda: [0.95, 5.5], description="Real system parameters")
    schedule: Literal["up", "down"] | None = Field(default=None, description="Varying-xi profile")
    schedule_xi1: float = Field(default=1.0, description="xi1 held during a varying-xi profile")
    schedule_horizon: int = Field(default=200, ge=1, description="Ramp length of the varying-xi profile")

    def xi_schedule(self) -> XiSchedule:
        if self.schedule is None:
            return XiSchedule.constant(np.asarray(self.real_xi, dtype=np.float64))
        return XiSchedule.preset(self.schedule, xi1=self.schedule_xi1, horizon=self.schedule_horizon)


# Evaluation
def _grid(start: float, stop: float, step: float) -> list[float]:
    n = int(round((stop - start) / step)) + 1
    return [round(start + i * step, 10) for i in range(n)]


class EvalConfig(BaseModel):
    """Scoring, sweep grid and policy-surface grid."""

    xi1_values: list[float] = Field(default_factory=lambda: _grid(0.05, 0.95, 0.1), min_length=1)
    xi2_values: list[float] = Field(default_factory=lambda: _grid(5.5, 49.5, 1.0), min_length=1)
    initial_state: list[float] = Field(default_factory=lambda: [math.pi, 0.0], description="Rollout start")
    horizon: int = Field(default=1000, ge=0, description="Last step index included in the score")
    surface_x1: list[float] = Field(default_factory=lambda: [-math.pi, math.pi, 41.0], description="start, stop, count")
    surface_x2: list[float] = Field(default_factory=lambda: [-8.0, 8.0, 41.0], description="start, stop, count")

    def surface_axes(self) -> tuple[np.ndarray, np.ndarray]:
        axes = []
        for start, stop, count in (self.surface_x1, self.surface_x2):
            axes.append(np.linspace(start, stop, int(count)))
        return axes[0], axes[1]


class RunConfig(BaseModel):
    """Top-level configuration file."""

    name: str = Field(default="run", description="Run name")
    plant: PlantConfig = Field(default_factory=PlantConfig)
    reward: RewardConfig = Field(default_factory=RewardConfig)
    virtual_systems: dict[str, VirtualSystemConfig] = Field(default_factory=dict)
    stage1: Stage1Config = Field(default_factory=Stage1Config)
    stage2: Stage2Config = Field(default_factory=Stage2Config)
    eval: EvalConfig = Field(default_factory=EvalConfig)
    seed: int = Field(default=0, description="Base seed")
    output_dir: str | None = Field(default=None, description="Run output directory")

    @model_validator(mode="after")
    def _check_parameters(self) -> "RunConfig":
        region = self.plant.region()
        for sid, vs in self.virtual_systems.items():
            if not region.contains(np.asarray(vs.xi)):
                raise ValueError(f"virtual system {sid}: xi={vs.xi} lies outside the parameter region")
        if self.stage2.schedule is None and not region.contains(np.asarray(self.stage2.real_xi)):
            raise ValueError(f"stage2.real_xi={self.stage2.real_xi} lies outside the parameter region")
        for xi1 in self.eval.xi1_values:
            for xi2 in self.eval.xi2_values:
                if not region.contains(np.array([xi1, xi2])):
                    raise ValueError(f"eval grid point ({xi1}, {xi2}) lies outside the parameter region")
        return self

    def plant_spec(self, xi: list[float] | np.ndarray) -> PlantSpec:
        return self.plant.spec(xi)

    def reward_spec(self) -> RewardSpec:
        return self.reward.spec(self.plant.target)
