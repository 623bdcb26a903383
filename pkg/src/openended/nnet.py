"""Dense feed-forward networks with hand-written reverse-mode gradients.

Parameters live in one flat float64 vector laid out layer by layer: the
weight matrix (``in_dim x out_dim``, row-major) followed by the bias vector.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

class Activation(str, enum.Enum):
    RELU = "relu"
    IDENTITY = "identity"


class Loss(str, enum.Enum):
    SQUARED = "squared"
    CROSS_ENTROPY = "cross_entropy"


class ShapeError(ValueError):
    """Raised when a layer chain, input or parameter vector has the wrong size."""


class NonFiniteError(FloatingPointError):
    """Raised when a forward or backward pass produces inf/nan."""


@dataclass(frozen=True)
class LayerShape:
    in_dim: int
    out_dim: int
    activation: Activation = Activation.IDENTITY

    def __post_init__(self):
        if self.in_dim < 1 or self.out_dim < 1:
            raise ShapeError(f"layer dims must be positive, got {self.in_dim}->{self.out_dim}")
        object.__setattr__(self, "activation", Activation(self.activation))

    @property
    def n_params(self) -> int:
        return self.in_dim * self.out_dim + self.out_dim


@dataclass(frozen=True)
class SgdConfig:
    step_size: float = 0.05
    momentum: float = 0.9
    weight_decay: float = 1e-4

    def __post_init__(self):
        if not self.step_size > 0:
            raise ValueError("step_size must be positive")
        if not 0 <= self.momentum < 1:
            raise ValueError("momentum must lie in [0, 1)")
        if self.weight_decay < 0:
            raise ValueError("weight_decay must be non-negative")


@dataclass
class Network:
    shapes: tuple[LayerShape, ...]
    params: np.ndarray
    seed: int = 0
    _offsets: list[tuple[int, int, int]] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        self.shapes = tuple(self.shapes)
        check_shapes(self.shapes)
        self.params = np.asarray(self.params, dtype=np.float64)
        expected = param_count(self.shapes)
        if self.params.shape != (expected,):
            raise ShapeError(f"expected {expected} params, got shape {self.params.shape}")
        offsets = []
        pos = 0
        for s in self.shapes:
            w_end = pos + s.in_dim * s.out_dim
            offsets.append((pos, w_end, w_end + s.out_dim))
            pos = w_end + s.out_dim
        self._offsets = offsets

    @property
    def in_dim(self) -> int:
        return self.shapes[0].in_dim

    @property
    def out_dim(self) -> int:
        return self.shapes[-1].out_dim

    def layers(self, params: np.ndarray | None = None):
        """Yield ``(W, b, activation)`` views into ``params`` (defaults to own)."""
        p = self.params if params is None else params
        for s, (a, b, c) in zip(self.shapes, self._offsets):
            yield p[a:b].reshape(s.in_dim, s.out_dim), p[b:c], s.activation

    def copy(self) -> Network:
        return Network(self.shapes, self.params.copy(), self.seed)

    def with_params(self, params: np.ndarray) -> Network:
        return Network(self.shapes, params, self.seed)

    def __call__(self, x) -> np.ndarray:
        return forward(self, x)


def check_shapes(shapes) -> None:
    if not shapes:
        raise ShapeError("a network needs at least one layer")
    for prev, nxt in zip(shapes, shapes[1:]):
        if prev.out_dim != nxt.in_dim:
            raise ShapeError(f"layer chain mismatch: {prev.out_dim} -> {nxt.in_dim}")


def param_count(shapes) -> int:
    return sum(s.n_params for s in shapes)


def mlp_shapes(in_dim: int, hidden: int, out_dim: int, n_layers: int) -> list[LayerShape]:
    """ReLU hidden layers and an identity head; ``n_layers`` counts affine maps."""
    if n_layers < 1:
        raise ShapeError("n_layers must be >= 1")
    if n_layers == 1:
        return [LayerShape(in_dim, out_dim, Activation.IDENTITY)]
    dims = [in_dim] + [hidden] * (n_layers - 1) + [out_dim]
    return [
        LayerShape(a, b, Activation.RELU if i < n_layers - 1 else Activation.IDENTITY)
        for i, (a, b) in enumerate(zip(dims, dims[1:]))
    ]


def init_network(shapes, seed: int) -> Network:
    """Glorot-uniform weights and zero biases, deterministic in ``seed``."""
    shapes = tuple(shapes)
    check_shapes(shapes)
    rng = np.random.default_rng(seed)
    chunks = []
    for s in shapes:
        limit = np.sqrt(6.0 / (s.in_dim + s.out_dim))
        chunks.append(rng.uniform(-limit, limit, size=s.in_dim * s.out_dim))
        chunks.append(np.zeros(s.out_dim))
    return Network(shapes, np.concatenate(chunks), seed)


def _as_batch(net: Network, x) -> tuple[np.ndarray, bool]:
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim <= 1
    if x.ndim == 0:
        x = x.reshape(1, 1)
    elif x.ndim == 1:
        x = x.reshape(1, -1)
    if x.shape[1] != net.in_dim:
        raise ShapeError(f"input dim {x.shape[1]} does not match network input {net.in_dim}")
    return x, single


def forward(net: Network, x) -> np.ndarray:
    """Evaluate the network on one input vector or a ``(batch, in_dim)`` array."""
    a, single = _as_batch(net, x)
    for W, b, act in net.layers():
        a = a @ W + b
        if act is Activation.RELU:
            a = np.maximum(a, 0.0)
    return a[0] if single else a


def split_batch(batch) -> tuple[np.ndarray, np.ndarray]:
    """Turn a list of ``(x, y)`` pairs (or an ``(X, Y)`` tuple of arrays) into arrays."""
    if isinstance(batch, tuple) and len(batch) == 2 and isinstance(batch[0], np.ndarray):
        X, Y = batch
    else:
        if len(batch) == 0:
            raise ValueError("empty batch")
        X = np.array([np.atleast_1d(np.asarray(x, dtype=np.float64)) for x, _ in batch])
        Y = np.array([y for _, y in batch])
    if len(X) == 0:
        raise ValueError("empty batch")
    if X.ndim == 1:
        X = X.reshape(-1, 1)
    return X, Y


def per_sample_loss(outputs: np.ndarray, Y: np.ndarray, loss: Loss) -> np.ndarray:
    """Loss of each row of ``outputs`` against its target."""
    if loss is Loss.SQUARED:
        diff = outputs - np.asarray(Y, dtype=np.float64).reshape(outputs.shape)
        return np.sum(diff * diff, axis=1)
    labels = np.asarray(Y).astype(np.int64).reshape(-1)
    z = outputs - outputs.max(axis=1, keepdims=True)
    log_norm = np.log(np.exp(z).sum(axis=1))
    return log_norm - z[np.arange(len(labels)), labels]


def forward_cache(net: Network, X: np.ndarray) -> tuple[np.ndarray, list, list]:
    """Forward pass keeping layer inputs and pre-activations for backprop."""
    inputs = []
    pre = []
    a = X
    for W, b, act in net.layers():
        inputs.append(a)
        z = a @ W + b
        pre.append(z)
        a = np.maximum(z, 0.0) if act is Activation.RELU else z
    return a, inputs, pre


def output_delta(out: np.ndarray, Y, loss: Loss) -> tuple[float, np.ndarray]:
    """Mean loss over rows of ``out`` and its gradient w.r.t. ``out``."""
    n = len(out)
    if loss is Loss.SQUARED:
        diff = out - np.asarray(Y, dtype=np.float64).reshape(out.shape)
        return float(np.sum(diff * diff) / n), 2.0 * diff / n
    labels = np.asarray(Y).astype(np.int64).reshape(-1)
    if np.any(labels < 0) or np.any(labels >= out.shape[1]):
        raise ValueError("class label outside the network's output range")
    z = out - out.max(axis=1, keepdims=True)
    ez = np.exp(z)
    total = ez.sum(axis=1, keepdims=True)
    value = float(np.mean(np.log(total[:, 0]) - z[np.arange(n), labels]))
    delta = ez / total
    delta[np.arange(n), labels] -= 1.0
    return value, delta / n


def backward(net: Network, inputs: list, pre: list, delta: np.ndarray) -> np.ndarray:
    grad = np.empty_like(net.params)
    for i in range(len(net.shapes) - 1, -1, -1):
        s = net.shapes[i]
        a0, a1, a2 = net._offsets[i]
        if s.activation is Activation.RELU:
            delta = delta * (pre[i] > 0)
        grad[a0:a1] = (inputs[i].T @ delta).reshape(-1)
        grad[a1:a2] = delta.sum(axis=0)
        if i:
            delta = delta @ net.params[a0:a1].reshape(s.in_dim, s.out_dim).T
    return grad


def loss_and_grad(net: Network, batch, loss: Loss = Loss.SQUARED) -> tuple[float, np.ndarray]:
    """Mean batch loss and its gradient w.r.t. the flat parameter vector.

    Squared error is ``sum_j (h_j(x) - y_j)^2`` per sample; cross-entropy takes
    logits from the head and integer class targets.
    """
    loss = Loss(loss)
    X, Y = split_batch(batch)
    X, _ = _as_batch(net, X)
    out, inputs, pre = forward_cache(net, X)
    value, delta = output_delta(out, Y, loss)
    if not np.isfinite(value):
        raise NonFiniteError(f"non-finite loss {value}")
    grad = backward(net, inputs, pre, delta)
    if not np.all(np.isfinite(grad)):
        raise NonFiniteError("non-finite gradient")
    return value, grad


def sgd_step(
    net: Network, grad: np.ndarray, cfg: SgdConfig, velocity: np.ndarray
) -> tuple[Network, np.ndarray]:
    """One heavy-ball step with L2 weight decay; returns new (net, velocity)."""
    params = net.params.copy()
    velocity = np.array(velocity, dtype=np.float64)
    sgd_step_inplace(params, grad, cfg, velocity)
    return net.with_params(params), velocity


def sgd_step_inplace(params: np.ndarray, grad: np.ndarray, cfg: SgdConfig, velocity: np.ndarray) -> None:
    """``v <- mu*v + g + wd*p; p <- p - lr*v``, overwriting both buffers."""
    if grad.shape != params.shape or velocity.shape != params.shape:
        raise ShapeError("grad and velocity must match the parameter vector")
    velocity *= cfg.momentum
    velocity += grad
    velocity += cfg.weight_decay * params
    params -= cfg.step_size * velocity


def network_to_dict(net: Network) -> dict:
    return {
        "shapes": [
            {"in_dim": s.in_dim, "out_dim": s.out_dim, "activation": s.activation.value}
            for s in net.shapes
        ],
        "params": [float(v) for v in net.params],
        "seed": int(net.seed),
    }


def network_from_dict(obj: dict) -> Network:
    try:
        shapes = [LayerShape(s["in_dim"], s["out_dim"], s["activation"]) for s in obj["shapes"]]
        return Network(shapes, np.array(obj["params"], dtype=np.float64), int(obj.get("seed", 0)))
    except (KeyError, TypeError) as exc:
        raise ValueError(f"malformed network checkpoint: {exc}") from exc


def repr_17(v: float) -> str:
    return format(float(v), ".17g")


def save_network(net: Network, path) -> None:
    Path(path).write_text(json.dumps(network_to_dict(net)))


def load_network(path) -> Network:
    return network_from_dict(json.loads(Path(path).read_text()))
