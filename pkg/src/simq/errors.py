"""Exceptions raised across the simq pipeline."""


class SimQError(Exception):
    """Base exception for simq errors."""

    pass


class ConfigError(SimQError, ValueError):
    """Invalid configuration, argument range or unknown identifier."""

    pass


class ModelFileError(SimQError):
    """Model file is missing, unreadable or has an unsupported version."""

    pass


class ShapeError(SimQError, ValueError):
    """Array or layer dimensions do not match."""

    pass


class ActionBoxError(SimQError, ValueError):
    """Action lies outside the plant's action box."""

    pass


class BufferUnderflowError(SimQError):
    """Replay buffer holds fewer experiences than requested."""

    pass


class NumericalError(SimQError, ArithmeticError):
    """A non-finite value appeared where finite values are required."""

    pass


class DivergenceError(NumericalError):
    """Training or a closed-loop rollout diverged."""

    pass


class SolverError(SimQError):
    """The SPD solve for the ensemble greedy action failed."""

    pass
