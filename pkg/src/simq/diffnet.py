"""Dense feedforward network with exact reverse-mode gradients and Adam.

Parameters live in one contiguous float64 vector. Each layer owns a weight
block of shape (out_dim, in_dim) followed by a bias block of length out_dim,
so ``y = x @ W.T + b`` and the flat length is ``sum(in*out + out)``.

All functions accept a single input vector or a batch (rows are samples).
"""

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Literal

import numpy as np

from .errors import ModelFileError, NumericalError, ShapeError

logger = logging.getLogger(__name__)

Activation = Literal["relu", "tanh", "linear"]

ACTIVATIONS: tuple[str, ...] = ("relu", "tanh", "linear")

MODEL_FORMAT_VERSION = 1


@dataclass(frozen=True)
class LayerSpec:
    """Shape and activation of one dense layer."""

    in_dim: int
    out_dim: int
    activation: Activation = "linear"

    def __post_init__(self):
        if self.in_dim < 1 or self.out_dim < 1:
            raise ShapeError(f"Layer dimensions must be positive, got {self.in_dim}->{self.out_dim}")
        if self.activation not in ACTIVATIONS:
            raise ShapeError(f"Unknown activation '{self.activation}'. Valid: {', '.join(ACTIVATIONS)}")

    @property
    def size(self) -> int:
        return self.in_dim * self.out_dim + self.out_dim


def check_chain(specs: list[LayerSpec] | tuple[LayerSpec, ...]) -> tuple[LayerSpec, ...]:
    """Validate that consecutive layers connect."""
    specs = tuple(specs)
    if not specs:
        raise ShapeError("A network needs at least one layer")
    for i, (prev, nxt) in enumerate(zip(specs, specs[1:])):
        if prev.out_dim != nxt.in_dim:
            raise ShapeError(
                f"Layer {i} outputs {prev.out_dim} values but layer {i + 1} expects {nxt.in_dim}"
            )
    return specs


@dataclass(eq=False)
class NetParams:
    """Flat parameter vector plus the layer index map."""

    specs: tuple[LayerSpec, ...]
    data: np.ndarray
    offsets: tuple[int, ...] = field(init=False)

    def __post_init__(self):
        self.specs = check_chain(self.specs)
        self.data = np.asarray(self.data, dtype=np.float64)
        offsets = [0]
        for spec in self.specs:
            offsets.append(offsets[-1] + spec.size)
        self.offsets = tuple(offsets)
        if self.data.shape != (offsets[-1],):
            raise ShapeError(f"Expected {offsets[-1]} parameters, got shape {self.data.shape}")
        if not np.all(np.isfinite(self.data)):
            raise NumericalError("Network parameters contain non-finite values")

    def __len__(self) -> int:
        return self.data.shape[0]

    @property
    def in_dim(self) -> int:
        return self.specs[0].in_dim

    @property
    def out_dim(self) -> int:
        return self.specs[-1].out_dim

    def weight_slice(self, layer: int) -> slice:
        start = self.offsets[layer]
        spec = self.specs[layer]
        return slice(start, start + spec.in_dim * spec.out_dim)

    def bias_slice(self, layer: int) -> slice:
        spec = self.specs[layer]
        stop = self.offsets[layer + 1]
        return slice(stop - spec.out_dim, stop)

    def weights(self, layer: int) -> np.ndarray:
        """View of layer weights, shape (out_dim, in_dim)."""
        spec = self.specs[layer]
        return self.data[self.weight_slice(layer)].reshape(spec.out_dim, spec.in_dim)

    def bias(self, layer: int) -> np.ndarray:
        """View of layer biases."""
        return self.data[self.bias_slice(layer)]

    def copy(self) -> "NetParams":
        return NetParams(self.specs, self.data.copy())

    def with_data(self, data: np.ndarray) -> "NetParams":
        return NetParams(self.specs, data)


@dataclass
class Tape:
    """Intermediate values of one forward pass.

    ``inputs[i]`` is the input to layer i and ``outputs[i]`` its activated
    output. The parameter vector used is kept by reference; parameter updates
    in this package always produce new vectors, so the tape stays valid.
    """

    params: NetParams
    inputs: list[np.ndarray]
    outputs: list[np.ndarray]
    batched: bool

    def replay(self) -> np.ndarray:
        """Re-run the forward pass from the recorded input."""
        y, _ = forward(self.params, self.inputs[0] if self.batched else self.inputs[0][0])
        return y


@dataclass
class AdamState:
    """Adam moment estimates and hyperparameters."""

    m: np.ndarray
    v: np.ndarray
    t: int = 0
    step_size: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def zeros(cls, n: int, step_size: float = 1e-3, **kwargs: float) -> "AdamState":
        return cls(m=np.zeros(n), v=np.zeros(n), step_size=step_size, **kwargs)


def init_params(specs: list[LayerSpec] | tuple[LayerSpec, ...], seed: int) -> NetParams:
    """Initialize weights uniformly on [-1/sqrt(in_dim), 1/sqrt(in_dim)], biases at zero."""
    specs = check_chain(specs)
    rng = np.random.default_rng(seed)
    chunks = []
    for spec in specs:
        bound = 1.0 / np.sqrt(spec.in_dim)
        chunks.append(rng.uniform(-bound, bound, size=spec.in_dim * spec.out_dim))
        chunks.append(np.zeros(spec.out_dim))
    return NetParams(specs, np.concatenate(chunks))


def _activate(z: np.ndarray, activation: str) -> np.ndarray:
    if activation == "relu":
        return np.maximum(z, 0.0)
    if activation == "tanh":
        return np.tanh(z)
    return z


def _activation_grad(out: np.ndarray, activation: str) -> np.ndarray | None:
    # Derivatives expressed through the activated output.
    if activation == "relu":
        return (out > 0.0).astype(np.float64)
    if activation == "tanh":
        return 1.0 - out * out
    return None


def forward(p: NetParams, x: np.ndarray) -> tuple[np.ndarray, Tape]:
    """Evaluate the network on one input vector or a batch of rows."""
    x = np.asarray(x, dtype=np.float64)
    batched = x.ndim == 2
    h = x if batched else x.reshape(1, -1)
    if h.ndim != 2 or h.shape[1] != p.in_dim:
        raise ShapeError(f"Network expects inputs of length {p.in_dim}, got shape {x.shape}")
    if not np.all(np.isfinite(h)):
        raise NumericalError("Network input contains non-finite values")

    inputs, outputs = [], []
    for i, spec in enumerate(p.specs):
        inputs.append(h)
        h = _activate(h @ p.weights(i).T + p.bias(i), spec.activation)
        outputs.append(h)

    y = h if batched else h[0]
    return y, Tape(params=p, inputs=inputs, outputs=outputs, batched=batched)


def backward(tape: Tape, dloss_dy: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Back-propagate dLoss/dy; parameter gradients are summed over the batch."""
    p = tape.params
    dy = np.asarray(dloss_dy, dtype=np.float64)
    expected = tape.outputs[-1].shape if tape.batched else (p.out_dim,)
    if dy.shape != expected:
        raise ShapeError(f"dLoss/dy has shape {dy.shape}, tape expects {expected}")
    delta = dy if tape.batched else dy.reshape(1, -1)

    grad = np.zeros_like(p.data)
    for i in range(len(p.specs) - 1, -1, -1):
        local = _activation_grad(tape.outputs[i], p.specs[i].activation)
        if local is not None:
            delta = delta * local
        grad[p.weight_slice(i)] = (delta.T @ tape.inputs[i]).ravel()
        grad[p.bias_slice(i)] = delta.sum(axis=0)
        delta = delta @ p.weights(i)

    dx = delta if tape.batched else delta[0]
    return grad, dx


def adam_step(p: NetParams, g: np.ndarray, s: AdamState) -> tuple[NetParams, AdamState]:
    """One bias-corrected Adam update. Returns new parameters and state."""
    g = np.asarray(g, dtype=np.float64)
    if g.shape != p.data.shape:
        raise ShapeError(f"Gradient has shape {g.shape}, parameters {p.data.shape}")
    if not np.all(np.isfinite(g)):
        raise NumericalError("Gradient contains non-finite values")

    t = s.t + 1
    m = s.beta1 * s.m + (1.0 - s.beta1) * g
    v = s.beta2 * s.v + (1.0 - s.beta2) * g * g
    m_hat = m / (1.0 - s.beta1**t)
    v_hat = v / (1.0 - s.beta2**t)
    data = p.data - s.step_size * m_hat / (np.sqrt(v_hat) + s.eps)

    state = AdamState(m=m, v=v, t=t, step_size=s.step_size, beta1=s.beta1, beta2=s.beta2, eps=s.eps)
    return p.with_data(data), state


# -------------------------------------------------------------------------
# Persistence
# -------------------------------------------------------------------------


def _specs_to_json(specs: tuple[LayerSpec, ...]) -> list[dict[str, Any]]:
    return [{"in_dim": s.in_dim, "out_dim": s.out_dim, "activation": s.activation} for s in specs]


def save_network(
    path: str | Path,
    params: NetParams,
    seed: int,
    meta: dict[str, Any] | None = None,
    arrays: dict[str, np.ndarray] | None = None,
) -> None:
    """Write a versioned .npz model file.

    Args:
        path: Destination file
        params: Network parameters
        seed: Seed the parameters were initialized from
        meta: Extra JSON-serializable metadata
        arrays: Extra float arrays stored alongside the parameters
    """
    header = {
        "format_version": MODEL_FORMAT_VERSION,
        "layers": _specs_to_json(params.specs),
        "seed": int(seed),
        "meta": meta or {},
    }
    payload = {f"extra_{k}": np.asarray(v, dtype=np.float64) for k, v in (arrays or {}).items()}
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("wb") as fh:
        np.savez(fh, header=np.array(json.dumps(header, sort_keys=True)), params=params.data, **payload)
    logger.debug("Saved network with %d parameters to %s", len(params), path)


def load_network(path: str | Path) -> tuple[NetParams, int, dict[str, Any], dict[str, np.ndarray]]:
    """Read a model file written by save_network.

    Returns:
        (params, seed, meta, arrays)

    Raises:
        ModelFileError: If the file is missing, malformed or from another format version
    """
    path = Path(path)
    if not path.is_file():
        raise ModelFileError(f"Model file not found: {path}")

    try:
        with np.load(path, allow_pickle=False) as npz:
            header = json.loads(str(npz["header"]))
            data = npz["params"].copy()
            arrays = {k[len("extra_"):]: npz[k].copy() for k in npz.files if k.startswith("extra_")}
    except (OSError, ValueError, KeyError) as e:
        raise ModelFileError(f"Cannot read model file {path}: {e}") from e

    version = header.get("format_version")
    if version != MODEL_FORMAT_VERSION:
        raise ModelFileError(
            f"Model file {path} has format version {version}, expected {MODEL_FORMAT_VERSION}"
        )

    try:
        specs = tuple(LayerSpec(**layer) for layer in header["layers"])
        params = NetParams(specs, data)
    except (NumericalError, ShapeError, KeyError, TypeError) as e:
        raise ModelFileError(f"Model file {path} holds invalid parameters: {e}") from e
    return params, int(header["seed"]), header.get("meta", {}), arrays
