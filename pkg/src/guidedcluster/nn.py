"""Plain-numpy multilayer perceptrons with hand-derived backward passes, plus Adam.

Weights are stored (fan_in, fan_out) so the forward pass is ``X @ W + b``.
Gradients are exchanged as flat lists of arrays aligned with
:meth:`MlpParams.arrays`, which lets one Adam implementation serve both the
networks and the mixture-prior parameters.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import NumericalError

ACTIVATIONS = ("tanh", "relu", "identity")


@dataclass
class Layer:
    weights: np.ndarray  # (fan_in, fan_out)
    bias: np.ndarray  # (fan_out,)
    activation: str


@dataclass
class MlpParams:
    """An MLP as an ordered list of affine+activation layers."""

    layers: list[Layer]

    @property
    def in_dim(self) -> int:
        return self.layers[0].weights.shape[0]

    @property
    def out_dim(self) -> int:
        return self.layers[-1].weights.shape[1]

    def arrays(self) -> list[np.ndarray]:
        """Trainable arrays in a fixed order: W0, b0, W1, b1, ..."""
        out: list[np.ndarray] = []
        for layer in self.layers:
            out.append(layer.weights)
            out.append(layer.bias)
        return out

    def array_labels(self, prefix: str = "layer") -> list[str]:
        labels: list[str] = []
        for k in range(len(self.layers)):
            labels.append(f"{prefix} {k} weights")
            labels.append(f"{prefix} {k} bias")
        return labels

    def copy(self) -> "MlpParams":
        return MlpParams(
            [Layer(l.weights.copy(), l.bias.copy(), l.activation) for l in self.layers]
        )


def mlp_init(
    rng: np.random.Generator,
    layer_sizes: list[int],
    activation: str = "tanh",
) -> MlpParams:
    """Glorot-initialized MLP: W ~ N(0, 2/(fan_in+fan_out)), zero biases.

    Hidden layers use ``activation``; the final layer is always identity so the
    caller interprets raw output heads.
    """
    if len(layer_sizes) < 2:
        raise ValueError("need at least an input and an output size")
    if any(s < 1 for s in layer_sizes):
        raise ValueError("layer sizes must be >= 1")
    if activation not in ACTIVATIONS:
        raise ValueError(f"unknown activation {activation!r}")
    layers = []
    for k, (fan_in, fan_out) in enumerate(zip(layer_sizes[:-1], layer_sizes[1:])):
        std = np.sqrt(2.0 / (fan_in + fan_out))
        w = rng.standard_normal((fan_in, fan_out)) * std
        b = np.zeros(fan_out)
        act = "identity" if k == len(layer_sizes) - 2 else activation
        layers.append(Layer(w, b, act))
    return MlpParams(layers)


def _activate(s: np.ndarray, kind: str) -> np.ndarray:
    if kind == "tanh":
        return np.tanh(s)
    if kind == "relu":
        return np.maximum(s, 0.0)
    if kind == "identity":
        return s
    raise ValueError(f"unknown activation {kind!r}")


def _activate_grad(s: np.ndarray, kind: str) -> np.ndarray:
    # Derivative wrt the pre-activation; relu subgradient at 0 is 0.
    if kind == "tanh":
        t = np.tanh(s)
        return 1.0 - t * t
    if kind == "relu":
        return (s > 0.0).astype(np.float64)
    if kind == "identity":
        return np.ones_like(s)
    raise ValueError(f"unknown activation {kind!r}")


def mlp_forward(params: MlpParams, x: np.ndarray) -> tuple[np.ndarray, list]:
    """Forward pass. Returns the output and a cache for :func:`mlp_backward`."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2:
        raise ValueError("input must be 2-D (batch, features)")
    if x.shape[1] != params.in_dim:
        raise ValueError(f"input has {x.shape[1]} columns, network expects {params.in_dim}")
    cache = []
    h = x
    for layer in params.layers:
        s = h @ layer.weights + layer.bias
        cache.append((h, s))
        h = _activate(s, layer.activation)
    return h, cache


def mlp_backward(
    params: MlpParams,
    cache: list,
    d_out: np.ndarray,
) -> tuple[np.ndarray, list[np.ndarray]]:
    """Reverse-mode gradients of the forward map.

    ``d_out`` is the gradient of some scalar wrt the forward output. Returns
    (gradient wrt the input batch, gradients aligned with ``params.arrays()``).
    """
    d_out = np.asarray(d_out, dtype=np.float64)
    if len(cache) != len(params.layers):
        raise ValueError("cache does not match network depth")
    n = cache[0][0].shape[0]
    if d_out.shape != (n, params.out_dim):
        raise ValueError(f"d_out shape {d_out.shape} does not match output ({n}, {params.out_dim})")
    grads: list[np.ndarray] = [None] * (2 * len(params.layers))  # type: ignore[list-item]
    delta = d_out
    for k in range(len(params.layers) - 1, -1, -1):
        layer = params.layers[k]
        h_in, s = cache[k]
        if s.shape != (n, layer.weights.shape[1]) or h_in.shape != (n, layer.weights.shape[0]):
            raise ValueError(f"cache entry {k} does not match layer shapes")
        delta = delta * _activate_grad(s, layer.activation)
        grads[2 * k] = h_in.T @ delta
        grads[2 * k + 1] = delta.sum(axis=0)
        delta = delta @ layer.weights.T
    return delta, grads


def zero_grads_like(params: MlpParams) -> list[np.ndarray]:
    return [np.zeros_like(a) for a in params.arrays()]


def add_grads(acc: list[np.ndarray], extra: list[np.ndarray]) -> None:
    for a, e in zip(acc, extra):
        a += e


@dataclass
class AdamState:
    """Adam optimizer state over a fixed list of parameter arrays."""

    lr: float
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    t: int = 0
    m: list[np.ndarray] = field(default_factory=list)
    v: list[np.ndarray] = field(default_factory=list)

    @classmethod
    def for_arrays(cls, arrays: list[np.ndarray], lr: float, **kw) -> "AdamState":
        state = cls(lr=lr, **kw)
        state.m = [np.zeros_like(a) for a in arrays]
        state.v = [np.zeros_like(a) for a in arrays]
        return state


def adam_step_arrays(
    state: AdamState,
    arrays: list[np.ndarray],
    grads: list[np.ndarray],
    labels: list[str] | None = None,
) -> None:
    """One bias-corrected Adam update, in place, minimizing the objective."""
    if len(arrays) != len(state.m) or len(grads) != len(arrays):
        raise ValueError("parameter/gradient lists do not match optimizer state")
    state.t += 1
    bc1 = 1.0 - state.beta1**state.t
    bc2 = 1.0 - state.beta2**state.t
    for i, (a, g) in enumerate(zip(arrays, grads)):
        if not np.all(np.isfinite(g)):
            where = labels[i] if labels and i < len(labels) else f"array {i}"
            raise NumericalError(f"gradient overflow in {where}")
        state.m[i] = state.beta1 * state.m[i] + (1.0 - state.beta1) * g
        state.v[i] = state.beta2 * state.v[i] + (1.0 - state.beta2) * g * g
        m_hat = state.m[i] / bc1
        v_hat = state.v[i] / bc2
        a -= state.lr * m_hat / (np.sqrt(v_hat) + state.eps)


def adam_step(state: AdamState, params: MlpParams, grads: list[np.ndarray]) -> None:
    """Adam update of a network's parameters (gradients of a loss to minimize)."""
    adam_step_arrays(state, params.arrays(), grads, params.array_labels())
