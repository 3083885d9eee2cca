"""Dense feed-forward networks with hand-written backpropagation.

Every network here has the same skeleton: four ReLU hidden layers of equal
width followed by one output layer. Weights for a layer are stored as a
single ``(fan_in + 1, fan_out)`` array whose last row is the bias, so a
layer is ``a @ W[:-1] + W[-1]``.

All arithmetic is float64.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from .errors import DomainError, ShapeError, StateError, TrainingError

N_HIDDEN = 4
EPS = 1e-7


class Activation(str, enum.Enum):
    RELU = "relu"
    SIGMOID = "sigmoid"
    LINEAR = "linear"


class Direction(str, enum.Enum):
    ASCEND = "ascend"
    DESCEND = "descend"


@dataclass(frozen=True)
class Mlp:
    """Four hidden ReLU layers plus an output layer.

    Attributes:
        layer_weights: five arrays, ``(fan_in + 1, fan_out)`` each, bias last.
        hidden_activation: always ``Activation.RELU``.
        output_activation: ``SIGMOID`` for detectors, ``LINEAR`` for generators.
        input_dim: number of input columns.
        layer_width: nodes in every hidden layer.
    """

    layer_weights: tuple[np.ndarray, ...]
    output_activation: Activation
    input_dim: int
    layer_width: int
    hidden_activation: Activation = Activation.RELU

    def __post_init__(self):
        weights = tuple(np.asarray(w, dtype=np.float64) for w in self.layer_weights)
        object.__setattr__(self, "layer_weights", weights)
        object.__setattr__(self, "output_activation", Activation(self.output_activation))
        if self.hidden_activation != Activation.RELU:
            raise ValueError("hidden layers only support ReLU")
        if len(weights) != N_HIDDEN + 1:
            raise ShapeError(f"expected {N_HIDDEN + 1} weight arrays, got {len(weights)}")
        fan_in = self.input_dim
        for i, w in enumerate(weights):
            if w.ndim != 2 or w.shape[0] != fan_in + 1:
                raise ShapeError(
                    f"layer {i}: expected {fan_in + 1} rows (fan_in + bias), got shape {w.shape}"
                )
            if i < N_HIDDEN and w.shape[1] != self.layer_width:
                raise ShapeError(f"layer {i}: width {w.shape[1]} != {self.layer_width}")
            if not np.all(np.isfinite(w)):
                raise ValueError(f"layer {i} has non-finite weights")
            fan_in = w.shape[1]

    @property
    def out_dim(self) -> int:
        return self.layer_weights[-1].shape[1]

    @property
    def n_params(self) -> int:
        return sum(w.size for w in self.layer_weights)


@dataclass(frozen=True)
class SgdConfig:
    learning_rate: float
    batch_size: int = 500
    seed: int = 0

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise ValueError(f"learning_rate must be > 0, got {self.learning_rate}")
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size}")


@dataclass
class ForwardCache:
    """Activations kept by :func:`forward` for one batch.

    ``inputs[i]`` is what layer ``i`` consumed; ``inputs[0]`` is the batch.
    """

    inputs: list[np.ndarray]
    pre_activations: list[np.ndarray]
    output: np.ndarray
    weight_shapes: tuple[tuple[int, int], ...]


def sigmoid(x: np.ndarray) -> np.ndarray:
    # tanh form never overflows
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def init_weights(
    input_dim: int,
    layer_width: int,
    out_dim: int,
    output_activation: Activation | str,
    seed: int | np.random.Generator,
) -> Mlp:
    """Glorot-uniform weights, zero biases, deterministic for a fixed seed."""
    if min(input_dim, layer_width, out_dim) < 1:
        raise ValueError("all dimensions must be positive")
    rng = np.random.default_rng(seed)
    sizes = [input_dim] + [layer_width] * N_HIDDEN + [out_dim]
    weights = []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        bound = np.sqrt(6.0 / (fan_in + fan_out))
        w = np.zeros((fan_in + 1, fan_out))
        w[:-1] = rng.uniform(-bound, bound, size=(fan_in, fan_out))
        weights.append(w)
    return Mlp(tuple(weights), Activation(output_activation), input_dim, layer_width)


def forward(net: Mlp, batch: np.ndarray, *, keep_cache: bool = False):
    """Run ``batch`` through ``net``.

    Sigmoid outputs are clipped to ``[EPS, 1 - EPS]`` so they always lie
    strictly inside (0, 1).

    Returns the ``(n, out_dim)`` output, or ``(output, ForwardCache)`` when
    ``keep_cache`` is set.
    """
    a = np.asarray(batch, dtype=np.float64)
    if a.ndim != 2 or a.shape[1] != net.input_dim:
        raise ShapeError(f"batch shape {a.shape} does not match input_dim {net.input_dim}")
    inputs, pres = [], []
    last = len(net.layer_weights) - 1
    for i, w in enumerate(net.layer_weights):
        inputs.append(a)
        z = a @ w[:-1] + w[-1]
        pres.append(z)
        if i < last:
            a = np.maximum(z, 0.0)
        elif net.output_activation == Activation.SIGMOID:
            a = np.clip(sigmoid(z), EPS, 1.0 - EPS)
        else:
            a = z
    if not keep_cache:
        return a
    shapes = tuple(w.shape for w in net.layer_weights)
    return a, ForwardCache(inputs, pres, a, shapes)


def backward(net: Mlp, cache: ForwardCache, grad_out: np.ndarray):
    """Backpropagate ``grad_out`` (d loss / d output) through ``net``.

    Returns ``(grads, grad_input)``: ``grads[i]`` has the shape of
    ``net.layer_weights[i]`` (bias gradient in the last row) and
    ``grad_input`` is d loss / d batch.
    """
    if cache.weight_shapes != tuple(w.shape for w in net.layer_weights):
        raise StateError("cache was produced by a network with different layer shapes")
    grad_out = np.asarray(grad_out, dtype=np.float64)
    if grad_out.shape != cache.output.shape:
        raise StateError(
            f"grad_out shape {grad_out.shape} does not match cached output {cache.output.shape}"
        )
    if net.output_activation == Activation.SIGMOID:
        p = cache.output
        delta = grad_out * p * (1.0 - p)
    else:
        delta = grad_out
    n_layers = len(net.layer_weights)
    grads: list[np.ndarray] = [None] * n_layers  # type: ignore[list-item]
    for i in range(n_layers - 1, -1, -1):
        w = net.layer_weights[i]
        g = np.empty_like(w)
        g[:-1] = cache.inputs[i].T @ delta
        g[-1] = delta.sum(axis=0)
        grads[i] = g
        upstream = delta @ w[:-1].T
        if i > 0:
            delta = upstream * (cache.pre_activations[i - 1] > 0.0)
    return grads, upstream


def sgd_step(
    net: Mlp,
    grads: Sequence[np.ndarray],
    cfg: SgdConfig,
    direction: Direction | str = Direction.DESCEND,
) -> Mlp:
    """One plain gradient step; returns a new network."""
    if len(grads) != len(net.layer_weights):
        raise ShapeError(f"expected {len(net.layer_weights)} gradient arrays, got {len(grads)}")
    sign = 1.0 if Direction(direction) == Direction.ASCEND else -1.0
    step = sign * cfg.learning_rate
    updated = []
    for i, (w, g) in enumerate(zip(net.layer_weights, grads)):
        g = np.asarray(g)
        if g.shape != w.shape:
            raise ShapeError(f"layer {i}: gradient shape {g.shape} != weight shape {w.shape}")
        if not np.all(np.isfinite(g)):
            raise TrainingError(f"non-finite gradient in layer {i}", layer=i)
        updated.append(w + step * g)
    return replace(net, layer_weights=tuple(updated))


def bce_loss(predictions: np.ndarray, labels: np.ndarray) -> float:
    """Mean binary cross entropy with predictions clamped to ``[EPS, 1 - EPS]``."""
    p = np.clip(np.ravel(np.asarray(predictions, dtype=np.float64)), EPS, 1.0 - EPS)
    y = np.ravel(np.asarray(labels, dtype=np.float64))
    if p.size == 0:
        raise DomainError("bce_loss of empty vectors")
    if p.shape != y.shape:
        raise ShapeError(f"predictions {p.shape} and labels {y.shape} differ in length")
    return float(-np.mean(y * np.log(p) + (1.0 - y) * np.log1p(-p)))
