"""Differentiable building blocks with explicit reverse rules.

Layers hold their parameters and gradient slots in plain dicts and cache
whatever the backward pass needs on ``forward``. Backward methods return
the input gradient and accumulate parameter gradients in place, so a
model walks its layers forward in order and backward in reverse -- the
caches are the tape. Weight sharing is by dict identity: a layer built
with ``share_from`` reads and accumulates through the donor's arrays
while keeping its own caches.

Sequence arrays are (T, B, D) throughout. Recurrent layers accept a
``lengths`` vector for zero-padded batches; padded frames carry no
gradient as long as the loss ignores them, and bidirectional layers
reverse each sample individually so padding never leaks into real
frames.
"""

from __future__ import annotations

import numpy as np

from . import kernels
from .errors import DimensionError, EmptySequenceError, NumericError
from .rng import Prng

GATES = ("z", "r", "h")


def glorot_uniform(prng: Prng, fan_in: int, fan_out: int, shape, dtype):
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    n = int(np.prod(shape))
    return prng.uniform(-limit, limit, n).reshape(shape).astype(dtype)


def softmax(scores: np.ndarray, axis: int = -1) -> np.ndarray:
    """Max-subtracted softmax; raises on non-finite scores."""
    x = np.asarray(scores)
    if not np.all(np.isfinite(x)):
        raise NumericError("softmax input contains non-finite values")
    shifted = x - np.max(x, axis=axis, keepdims=True)
    e = np.exp(shifted)
    return e / np.sum(e, axis=axis, keepdims=True)


def log_softmax(x: np.ndarray, axis: int = -1) -> np.ndarray:
    shifted = x - np.max(x, axis=axis, keepdims=True)
    return shifted - np.log(np.sum(np.exp(shifted), axis=axis, keepdims=True))


def softmax_backward(weights: np.ndarray, dweights: np.ndarray, axis: int = -1):
    """Gradient w.r.t. scores given softmax output and its gradient."""
    inner = np.sum(weights * dweights, axis=axis, keepdims=True)
    return weights * (dweights - inner)


def reverse_padded(x: np.ndarray, lengths) -> np.ndarray:
    """Reverse each sample's first ``lengths[b]`` frames; padding stays put."""
    if lengths is None:
        return x[::-1].copy()
    out = x.copy()
    for b, n in enumerate(lengths):
        out[:n, b] = x[:n, b][::-1]
    return out


class Layer:
    """Common parameter/gradient bookkeeping."""

    def __init__(self):
        self.params: dict[str, np.ndarray] = {}
        self.grads: dict[str, np.ndarray] = {}

    def _register(self, name: str, value: np.ndarray):
        self.params[name] = value
        self.grads[name] = np.zeros_like(value)

    def _adopt(self, donor: "Layer"):
        # dict identity is the sharing mechanism
        self.params = donor.params
        self.grads = donor.grads


class Dense(Layer):
    """Per-frame affine map with optional tanh, applied over (T, B, D)."""

    def __init__(self, d_in, d_out, activation="identity", *, prng=None, dtype=np.float32):
        super().__init__()
        if activation not in ("identity", "tanh"):
            raise DimensionError(f"unsupported activation {activation!r}")
        self.d_in, self.d_out, self.activation = d_in, d_out, activation
        if prng is None:
            prng = Prng(0)
        self._register("w", glorot_uniform(prng, d_in, d_out, (d_in, d_out), dtype))
        self._register("b", np.zeros(d_out, dtype))

    @classmethod
    def share_from(cls, donor: "Dense"):
        layer = cls.__new__(cls)
        Layer.__init__(layer)
        layer.d_in, layer.d_out = donor.d_in, donor.d_out
        layer.activation = donor.activation
        layer._adopt(donor)
        return layer

    def forward(self, x, lengths=None):
        if x.shape[-1] != self.d_in:
            raise DimensionError(
                f"dense expects last dim {self.d_in}, got {x.shape[-1]}"
            )
        lead = x.shape[:-1]
        y = x.reshape(-1, self.d_in) @ self.params["w"] + self.params["b"]
        y = y.reshape(*lead, self.d_out)
        if self.activation == "tanh":
            y = np.tanh(y)
        self._cache = (x, y)
        return y

    def backward(self, dy):
        x, y = self._cache
        if self.activation == "tanh":
            dy = dy * (1.0 - y * y)
        flat_x = x.reshape(-1, self.d_in)
        flat_dy = np.ascontiguousarray(dy).reshape(-1, self.d_out)
        self.grads["w"] += flat_x.T @ flat_dy
        self.grads["b"] += flat_dy.sum(axis=0)
        return (flat_dy @ self.params["w"].T).reshape(x.shape)


class Gru(Layer):
    """Single-direction GRU over (T, B, D) with zero initial state.

    Gate equations: update z and reset r are sigmoids of their affine
    terms; the candidate applies the reset to the previous state before
    the recurrent product; the new state interpolates previous state
    (weight 1-z) against the candidate (weight z).
    """

    def __init__(self, d_in, hidden, *, prng=None, dtype=np.float32):
        super().__init__()
        self.d_in, self.hidden = d_in, hidden
        if prng is None:
            prng = Prng(0)
        for gate in GATES:
            self._register(
                f"w_{gate}", glorot_uniform(prng, d_in, hidden, (d_in, hidden), dtype)
            )
            self._register(
                f"u_{gate}", glorot_uniform(prng, hidden, hidden, (hidden, hidden), dtype)
            )
            self._register(f"b_{gate}", np.zeros(hidden, dtype))

    @classmethod
    def share_from(cls, donor: "Gru"):
        layer = cls.__new__(cls)
        Layer.__init__(layer)
        layer.d_in, layer.hidden = donor.d_in, donor.hidden
        layer._adopt(donor)
        return layer

    def _packed(self):
        p = self.params
        w = np.ascontiguousarray(np.hstack([p["w_z"], p["w_r"], p["w_h"]]))
        b = np.concatenate([p["b_z"], p["b_r"], p["b_h"]])
        return w, b

    def forward(self, x, lengths=None):
        if x.ndim != 3:
            raise DimensionError(f"gru expects (T, B, D), got shape {x.shape}")
        T, B, D = x.shape
        if T == 0:
            raise EmptySequenceError("gru received an empty sequence")
        if D != self.d_in:
            raise DimensionError(f"gru expects input dim {self.d_in}, got {D}")
        p = self.params
        w, b = self._packed()
        gx = (x.reshape(T * B, D) @ w + b).reshape(T, B, 3 * self.hidden)
        h0 = np.zeros((B, self.hidden), x.dtype)
        h, z, r, c = kernels.gru_forward(
            np.ascontiguousarray(gx), h0, p["u_z"], p["u_r"], p["u_h"]
        )
        self._cache = (x, h0, h, z, r, c)
        return h

    def backward(self, dy):
        x, h0, h, z, r, c = self._cache
        T, B, _ = x.shape
        p, g = self.params, self.grads
        dgx, _dh0 = kernels.gru_backward(
            np.ascontiguousarray(dy),
            z,
            r,
            c,
            h,
            h0,
            np.ascontiguousarray(p["u_z"].T),
            np.ascontiguousarray(p["u_r"].T),
            np.ascontiguousarray(p["u_h"].T),
        )
        H = self.hidden
        h_prev = np.concatenate([h0[None], h[:-1]], axis=0).reshape(T * B, H)
        flat_x = x.reshape(T * B, self.d_in)
        flat_dgx = dgx.reshape(T * B, 3 * H)
        for i, gate in enumerate(GATES):
            block = flat_dgx[:, i * H : (i + 1) * H]
            g[f"w_{gate}"] += flat_x.T @ block
            g[f"b_{gate}"] += block.sum(axis=0)
        g["u_z"] += h_prev.T @ flat_dgx[:, :H]
        g["u_r"] += h_prev.T @ flat_dgx[:, H : 2 * H]
        g["u_h"] += (r.reshape(T * B, H) * h_prev).T @ flat_dgx[:, 2 * H :]
        w, _ = self._packed()
        return (flat_dgx @ w.T).reshape(x.shape)


class BiGru(Layer):
    """Forward and per-sample time-reversed GRU, concatenated per frame."""

    def __init__(self, d_in, hidden, *, prng=None, dtype=np.float32):
        super().__init__()
        self.d_in, self.hidden = d_in, hidden
        if prng is None:
            prng = Prng(0)
        self.fwd = Gru(d_in, hidden, prng=prng.split("fwd"), dtype=dtype)
        self.bwd = Gru(d_in, hidden, prng=prng.split("bwd"), dtype=dtype)

    @classmethod
    def share_from(cls, donor: "BiGru"):
        layer = cls.__new__(cls)
        Layer.__init__(layer)
        layer.d_in, layer.hidden = donor.d_in, donor.hidden
        layer.fwd = Gru.share_from(donor.fwd)
        layer.bwd = Gru.share_from(donor.bwd)
        return layer

    @property
    def sublayers(self):
        return {"fwd": self.fwd, "bwd": self.bwd}

    def forward(self, x, lengths=None):
        self._lengths = lengths
        hf = self.fwd.forward(x)
        hb = reverse_padded(self.bwd.forward(reverse_padded(x, lengths)), lengths)
        return np.concatenate([hf, hb], axis=2)

    def backward(self, dy):
        H = self.hidden
        dxf = self.fwd.backward(np.ascontiguousarray(dy[:, :, :H]))
        dxb = reverse_padded(
            self.bwd.backward(
                np.ascontiguousarray(reverse_padded(dy[:, :, H:], self._lengths))
            ),
            self._lengths,
        )
        return dxf + dxb


class GruStack(Layer):
    """Stack of GRU (or BiGRU) layers; output dim doubles when bidirectional."""

    def __init__(self, d_in, hidden_sizes, *, bidirectional=False, prng=None,
                 dtype=np.float32):
        super().__init__()
        if not hidden_sizes:
            raise DimensionError("classifier needs at least one recurrent layer")
        if prng is None:
            prng = Prng(0)
        self.bidirectional = bidirectional
        self.layers = []
        d = d_in
        for j, h in enumerate(hidden_sizes):
            cls = BiGru if bidirectional else Gru
            self.layers.append(cls(d, h, prng=prng.split(j), dtype=dtype))
            d = 2 * h if bidirectional else h
        self.d_out = d

    def forward(self, x, lengths=None):
        for layer in self.layers:
            x = layer.forward(x, lengths)
        return x

    def backward(self, dy):
        for layer in reversed(self.layers):
            dy = layer.backward(dy)
        return dy


class AttentionHead(Layer):
    """Scalar per-frame relevance score: small GRU plus affine map to 1."""

    def __init__(self, d_in, hidden, *, prng=None, dtype=np.float32):
        super().__init__()
        self.d_in, self.hidden = d_in, hidden
        if prng is None:
            prng = Prng(0)
        self.gru = Gru(d_in, hidden, prng=prng.split("gru"), dtype=dtype)
        self.score = Dense(hidden, 1, "identity", prng=prng.split("score"), dtype=dtype)

    @classmethod
    def share_from(cls, donor: "AttentionHead"):
        layer = cls.__new__(cls)
        Layer.__init__(layer)
        layer.d_in, layer.hidden = donor.d_in, donor.hidden
        layer.gru = Gru.share_from(donor.gru)
        layer.score = Dense.share_from(donor.score)
        return layer

    def forward(self, x, lengths=None):
        return self.score.forward(self.gru.forward(x, lengths))[..., 0]

    def backward(self, dscores):
        return self.gru.backward(self.score.backward(dscores[..., None]))
