"""Dense networks with hand-written backprop, plus RMSprop.

Everything is float64 numpy. Inputs are either a single vector of shape
``(in_dim,)`` or a batch of row vectors ``(n, in_dim)``; weights are stored
``(out_dim, in_dim)`` so a layer computes ``act(x @ W.T + b)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

TANH = "tanh"
IDENTITY = "identity"
ACTIVATIONS = (TANH, IDENTITY)


class ShapeError(ValueError):
    pass


class StaleCacheError(RuntimeError):
    pass


class NonFiniteError(FloatingPointError):
    pass


@dataclass
class DenseLayer:
    weights: np.ndarray
    bias: np.ndarray
    activation: str = TANH

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=np.float64)
        self.bias = np.asarray(self.bias, dtype=np.float64).reshape(-1)
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}")
        if self.weights.ndim != 2 or self.bias.shape[0] != self.weights.shape[0]:
            raise ShapeError(
                f"weights {self.weights.shape} and bias {self.bias.shape} disagree"
            )

    @property
    def in_dim(self) -> int:
        return self.weights.shape[1]

    @property
    def out_dim(self) -> int:
        return self.weights.shape[0]

    @classmethod
    def init(cls, in_dim: int, out_dim: int, activation: str, rng: np.random.Generator):
        bound = 1.0 / np.sqrt(in_dim)
        w = rng.uniform(-bound, bound, size=(out_dim, in_dim))
        return cls(w, np.zeros(out_dim), activation)


@dataclass
class Mlp:
    """An ordered stack of dense layers.

    Standalone networks end in an identity layer (see :func:`make_mlp`); a
    shared trunk feeding several heads is also an ``Mlp`` but ends in tanh.
    """

    layers: list[DenseLayer] = field(default_factory=list)

    def __post_init__(self):
        for i in range(1, len(self.layers)):
            if self.layers[i].in_dim != self.layers[i - 1].out_dim:
                raise ShapeError(
                    f"layer {i} expects {self.layers[i].in_dim} inputs but layer "
                    f"{i - 1} produces {self.layers[i - 1].out_dim}"
                )

    @property
    def in_dim(self) -> int:
        return self.layers[0].in_dim

    @property
    def out_dim(self) -> int:
        return self.layers[-1].out_dim

    def parameters(self) -> list[np.ndarray]:
        out = []
        for layer in self.layers:
            out.append(layer.weights)
            out.append(layer.bias)
        return out

    def signature(self) -> tuple:
        return tuple((l.weights.shape, l.activation) for l in self.layers)


def make_mlp(
    sizes: Sequence[int],
    rng: np.random.Generator,
    final_activation: str = IDENTITY,
) -> Mlp:
    """Build ``sizes[0] -> ... -> sizes[-1]`` with tanh hidden layers."""
    if len(sizes) < 2:
        raise ValueError("need at least an input and an output size")
    layers = []
    for i in range(len(sizes) - 1):
        last = i == len(sizes) - 2
        act = final_activation if last else TANH
        layers.append(DenseLayer.init(sizes[i], sizes[i + 1], act, rng))
    return Mlp(layers)


@dataclass
class ForwardCache:
    owner: int
    signature: tuple
    inputs: list[np.ndarray]
    outputs: list[np.ndarray]


def mlp_forward(mlp: Mlp, x) -> tuple[np.ndarray, ForwardCache]:
    x = np.asarray(x, dtype=np.float64)
    inputs, outputs = [], []
    h = x
    for i, layer in enumerate(mlp.layers):
        if h.shape[-1] != layer.in_dim:
            raise ShapeError(
                f"layer {i}: expected input dim {layer.in_dim}, got {h.shape[-1]}"
            )
        inputs.append(h)
        z = h @ layer.weights.T + layer.bias
        h = np.tanh(z) if layer.activation == TANH else z
        outputs.append(h)
    return h, ForwardCache(id(mlp), mlp.signature(), inputs, outputs)


def mlp_backward(
    mlp: Mlp, cache: ForwardCache, grad_output
) -> tuple[list[np.ndarray], np.ndarray]:
    """Reverse pass. Returns grads aligned with ``mlp.parameters()`` and dL/dx."""
    if cache.owner != id(mlp) or cache.signature != mlp.signature():
        raise StaleCacheError("cache was not produced by this network")
    g = np.asarray(grad_output, dtype=np.float64)
    if g.shape != cache.outputs[-1].shape:
        raise ShapeError(
            f"grad_output shape {g.shape} != output shape {cache.outputs[-1].shape}"
        )
    grads: list[np.ndarray] = [None] * (2 * len(mlp.layers))  # type: ignore[list-item]
    for i in range(len(mlp.layers) - 1, -1, -1):
        layer = mlp.layers[i]
        if layer.activation == TANH:
            y = cache.outputs[i]
            g = g * (1.0 - y * y)
        x = cache.inputs[i]
        if g.ndim == 1:
            grads[2 * i] = np.outer(g, x)
            grads[2 * i + 1] = g.copy()
        else:
            grads[2 * i] = g.T @ x
            grads[2 * i + 1] = g.sum(axis=0)
        g = g @ layer.weights
    return grads, g


@dataclass
class RmsPropState:
    sq_avg: list[np.ndarray]
    decay: float = 0.99
    epsilon: float = 1e-5

    @classmethod
    def for_params(cls, params: Sequence[np.ndarray], decay=0.99, epsilon=1e-5):
        return cls([np.zeros_like(p) for p in params], decay, epsilon)


def global_norm(grads: Sequence[np.ndarray | None]) -> float:
    return float(np.sqrt(sum(float(np.sum(g * g)) for g in grads if g is not None)))


def rmsprop_step(
    params: Sequence[np.ndarray],
    grads: Sequence[np.ndarray | None],
    state: RmsPropState,
    lr: float,
    max_grad_norm: float | None = None,
) -> None:
    """In-place RMSprop update. ``None`` grads leave that parameter and its
    second-moment estimate untouched (frozen or unused heads)."""
    if not (len(params) == len(grads) == len(state.sq_avg)):
        raise ShapeError("params, grads and optimizer state differ in length")
    for i, g in enumerate(grads):
        if g is None:
            continue
        if g.shape != params[i].shape or state.sq_avg[i].shape != params[i].shape:
            raise ShapeError(f"parameter {i}: shape mismatch")
        if not np.all(np.isfinite(g)):
            raise NonFiniteError(f"non-finite gradient for parameter {i}")
    scale = 1.0
    if max_grad_norm is not None:
        norm = global_norm(grads)
        if norm > max_grad_norm:
            scale = max_grad_norm / (norm + 1e-12)
    d, eps = state.decay, state.epsilon
    for p, g, sq in zip(params, grads, state.sq_avg):
        if g is None:
            continue
        if scale != 1.0:
            g = g * scale
        sq *= d
        sq += (1.0 - d) * g * g
        p -= lr * g / (np.sqrt(sq) + eps)


LossFn = Callable[[np.ndarray], tuple[float, np.ndarray]]


def relative_error(analytic, numeric) -> np.ndarray:
    a, n = np.asarray(analytic), np.asarray(numeric)
    return np.abs(a - n) / np.maximum(1e-8, np.abs(a) + np.abs(n))


def numeric_grads(
    params: Sequence[np.ndarray], loss: Callable[[], float], h: float = 1e-5
) -> list[np.ndarray]:
    """Central finite differences of ``loss()`` w.r.t. each array in ``params``
    (perturbed in place and restored)."""
    out = []
    for p in params:
        g = np.zeros_like(p)
        flat, gflat = p.reshape(-1), g.reshape(-1)
        for j in range(flat.size):
            old = flat[j]
            flat[j] = old + h
            lp = loss()
            flat[j] = old - h
            lm = loss()
            flat[j] = old
            gflat[j] = (lp - lm) / (2 * h)
        out.append(g)
    return out


def max_relative_error(analytic: Sequence, numeric: Sequence) -> float:
    worst = 0.0
    for a, n in zip(analytic, numeric):
        if a is None:
            a = np.zeros_like(n)
        worst = max(worst, float(np.max(relative_error(a, n), initial=0.0)))
    return worst


def gradient_check(
    mlp: Mlp,
    x,
    scalar_loss_fn: LossFn,
    h: float = 1e-5,
    backward=mlp_backward,
) -> float:
    """Max relative error between backprop and central differences.

    ``scalar_loss_fn`` maps the network output to ``(loss, dloss/doutput)``.
    ``backward`` is swappable so a broken reverse pass can be shown to fail.
    """
    out, cache = mlp_forward(mlp, x)
    _, g_out = scalar_loss_fn(out)
    analytic, _ = backward(mlp, cache, g_out)
    numeric = numeric_grads(
        mlp.parameters(), lambda: scalar_loss_fn(mlp_forward(mlp, x)[0])[0], h
    )
    return max_relative_error(analytic, numeric)
