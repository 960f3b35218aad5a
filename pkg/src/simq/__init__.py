"""simq: continuous deep Q-learning on virtual systems and online ensemble adaptation."""

from .ensemble import NoiseSchedule, QEnsemble, online_run, update_weights
from .errors import (
    ActionBoxError,
    BufferUnderflowError,
    ConfigError,
    DivergenceError,
    ModelFileError,
    NumericalError,
    ShapeError,
    SimQError,
    SolverError,
)
from .evalkit import rollout, score, sweep
from .models import Experience, OnlineLog, ScoreReport, SweepGrid
from .naf import NafConfig, QModel, load_model, save_model
from .plant import PlantSpec, RewardSpec, XiSchedule
from .schemas import RunConfig, benchmark_config, desk_config
from .stage1 import train

__all__ = [
    "NoiseSchedule",
    "QEnsemble",
    "online_run",
    "update_weights",
    "ActionBoxError",
    "BufferUnderflowError",
    "ConfigError",
    "DivergenceError",
    "ModelFileError",
    "NumericalError",
    "ShapeError",
    "SimQError",
    "SolverError",
    "rollout",
    "score",
    "sweep",
    "Experience",
    "OnlineLog",
    "ScoreReport",
    "SweepGrid",
    "NafConfig",
    "QModel",
    "load_model",
    "save_model",
    "PlantSpec",
    "RewardSpec",
    "XiSchedule",
    "RunConfig",
    "desk_config",
    "benchmark_config",
    "train",
]
