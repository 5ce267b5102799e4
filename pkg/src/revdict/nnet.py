"""Dense feed-forward primitives shared by every learning component.

Everything is float64 numpy. A :class:`FeedForwardStack` in training mode
caches per-layer inputs and pre-activations on forward so that
:func:`backward` can consume them; in inference mode nothing is cached and
the stack is safe for concurrent readers.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

ACTIVATIONS = ("identity", "tanh", "relu")


def _as_matrix(x, name: str) -> np.ndarray:
    a = np.asarray(x, dtype=np.float64)
    if a.ndim != 2:
        raise ValueError(f"{name} must be 2-D, got shape {a.shape}")
    return a


def _apply(activation: str, z: np.ndarray) -> np.ndarray:
    if activation == "identity":
        return z
    if activation == "tanh":
        return np.tanh(z)
    if activation == "relu":
        return np.maximum(z, 0.0)
    raise ValueError(f"unknown activation {activation!r}")


def _apply_grad(activation: str, z: np.ndarray, a: np.ndarray, g: np.ndarray) -> np.ndarray:
    """Chain an upstream gradient g through the activation at (z, a)."""
    if activation == "identity":
        return g
    if activation == "tanh":
        return g * (1.0 - a * a)
    if activation == "relu":
        return g * (z > 0.0)
    raise ValueError(f"unknown activation {activation!r}")


class DenseLayer:
    """One affine map plus activation: a = act(x @ W.T + b).

    weights has shape (d_out, d_in); bias has shape (d_out,). The
    activation tag is fixed at construction.
    """

    __slots__ = ("weights", "bias", "activation")

    def __init__(self, weights, bias, activation: str = "identity"):
        if activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {activation!r}")
        w = _as_matrix(weights, "weights")
        b = np.asarray(bias, dtype=np.float64)
        if b.ndim != 1 or b.shape[0] != w.shape[0]:
            raise ValueError(
                f"bias shape {b.shape} incompatible with weights {w.shape}"
            )
        if not (np.isfinite(w).all() and np.isfinite(b).all()):
            raise ValueError("layer parameters must be finite")
        self.weights = w
        self.bias = b
        self.activation = activation

    @property
    def d_in(self) -> int:
        return self.weights.shape[1]

    @property
    def d_out(self) -> int:
        return self.weights.shape[0]

    def copy(self) -> "DenseLayer":
        return DenseLayer(self.weights.copy(), self.bias.copy(), self.activation)


class FeedForwardStack:
    """An ordered chain of dense layers with consistent dimensions."""

    def __init__(self, layers):
        layers = list(layers)
        if not layers:
            raise ValueError("stack needs at least one layer")
        for lo, hi in zip(layers, layers[1:]):
            if lo.d_out != hi.d_in:
                raise ValueError(
                    f"layer dims do not chain: {lo.d_out} -> {hi.d_in}"
                )
        self.layers = layers
        self.training = False
        self._cache = None

    @property
    def d_in(self) -> int:
        return self.layers[0].d_in

    @property
    def d_out(self) -> int:
        return self.layers[-1].d_out

    def parameters(self):
        """Flat parameter list [W1, b1, W2, b2, ...] (live arrays)."""
        out = []
        for layer in self.layers:
            out.append(layer.weights)
            out.append(layer.bias)
        return out

    def set_parameters(self, params) -> None:
        """Copy values from a flat parameter list back into the layers."""
        if len(params) != 2 * len(self.layers):
            raise ValueError("parameter count mismatch")
        for i, layer in enumerate(self.layers):
            w, b = params[2 * i], params[2 * i + 1]
            if w.shape != layer.weights.shape or b.shape != layer.bias.shape:
                raise ValueError("parameter shape mismatch")
            layer.weights[...] = w
            layer.bias[...] = b

    def copy(self) -> "FeedForwardStack":
        return FeedForwardStack([layer.copy() for layer in self.layers])


@dataclass
class Gradients:
    """Per-layer loss gradients, ordered like the stack's layers."""

    weights: list
    biases: list

    def flat(self):
        """Interleaved [dW1, db1, dW2, db2, ...] matching parameters()."""
        out = []
        for w, b in zip(self.weights, self.biases):
            out.append(w)
            out.append(b)
        return out


def glorot_uniform(rng: np.random.Generator, d_out: int, d_in: int) -> np.ndarray:
    """Uniform(-a, a) with a = sqrt(6 / (fan_in + fan_out))."""
    a = np.sqrt(6.0 / (d_in + d_out))
    return rng.uniform(-a, a, size=(d_out, d_in))


def forward(stack: FeedForwardStack, batch) -> np.ndarray:
    """Apply the stack row-wise to a batch of shape (B, d_in).

    In training mode the per-layer inputs, pre-activations and activations
    are cached for a subsequent backward() call.
    """
    x = _as_matrix(batch, "batch")
    if x.shape[0] < 1:
        raise ValueError("batch must contain at least one row")
    if x.shape[1] != stack.d_in:
        raise ValueError(
            f"batch has {x.shape[1]} columns, stack expects {stack.d_in}"
        )
    cache = [] if stack.training else None
    for layer in stack.layers:
        z = x @ layer.weights.T + layer.bias
        a = _apply(layer.activation, z)
        if cache is not None:
            cache.append((x, z, a))
        x = a
    if cache is not None:
        stack._cache = cache
    return x


def backward(stack: FeedForwardStack, loss_grad) -> Gradients:
    """Backpropagate dL/d(output) through the cached forward pass.

    loss_grad must already carry the loss's own scaling (e.g. the
    2/(B*d) factor of the element-mean MSE); the layer gradients here are
    plain sums over the batch, so the result is the true dL/dtheta.
    The forward cache is consumed.
    """
    if stack._cache is None:
        raise RuntimeError("backward() requires a cached forward pass")
    cache, stack._cache = stack._cache, None
    g = _as_matrix(loss_grad, "loss_grad")
    if g.shape != (cache[-1][2].shape[0], stack.d_out):
        raise ValueError(
            f"loss_grad shape {g.shape} does not match cached output "
            f"{(cache[-1][2].shape[0], stack.d_out)}"
        )
    d_weights = [None] * len(stack.layers)
    d_biases = [None] * len(stack.layers)
    for i in range(len(stack.layers) - 1, -1, -1):
        layer = stack.layers[i]
        x, z, a = cache[i]
        gz = _apply_grad(layer.activation, z, a, g)
        d_weights[i] = gz.T @ x
        d_biases[i] = gz.sum(axis=0)
        if i > 0:
            g = gz @ layer.weights
    return Gradients(d_weights, d_biases)


def mse_loss(pred, target) -> float:
    """Element-mean squared error: (1/(B*d)) * sum((pred - target)^2)."""
    p = _as_matrix(pred, "pred")
    t = _as_matrix(target, "target")
    if p.shape != t.shape:
        raise ValueError(f"shape mismatch: {p.shape} vs {t.shape}")
    d = p - t
    return float(np.mean(d * d))


def mse_loss_grad(pred, target) -> np.ndarray:
    """Gradient of mse_loss w.r.t. pred: 2*(pred - target)/(B*d)."""
    p = _as_matrix(pred, "pred")
    t = _as_matrix(target, "target")
    if p.shape != t.shape:
        raise ValueError(f"shape mismatch: {p.shape} vs {t.shape}")
    return (2.0 / p.size) * (p - t)


def cosine(u, v) -> float:
    """Cosine similarity; returns 0.0 when either norm is zero."""
    a = np.asarray(u, dtype=np.float64).ravel()
    b = np.asarray(v, dtype=np.float64).ravel()
    if a.shape != b.shape:
        raise ValueError(f"dim mismatch: {a.shape} vs {b.shape}")
    na = np.linalg.norm(a)
    nb = np.linalg.norm(b)
    if na == 0.0 or nb == 0.0:
        return 0.0
    return float(np.dot(a, b) / (na * nb))


def row_cosines(a, b) -> np.ndarray:
    """Per-row cosine between two equally shaped matrices (zero norm -> 0)."""
    a = _as_matrix(a, "a")
    b = _as_matrix(b, "b")
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    na = np.linalg.norm(a, axis=1)
    nb = np.linalg.norm(b, axis=1)
    num = np.sum(a * b, axis=1)
    den = na * nb
    out = np.zeros(a.shape[0])
    ok = den > 0.0
    out[ok] = num[ok] / den[ok]
    return out


def normalize_rows(m) -> np.ndarray:
    """L2-normalize each row; zero rows stay zero."""
    m = _as_matrix(m, "matrix")
    norms = np.linalg.norm(m, axis=1, keepdims=True)
    out = np.zeros_like(m)
    ok = norms[:, 0] > 0.0
    out[ok] = m[ok] / norms[ok]
    return out
