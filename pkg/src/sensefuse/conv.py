"""Per-frame convolutional feature extractor for image sensors.

Three 5x5 same-padded convolutions with tanh, each followed by 2x2
max pooling at stride 2 (odd trailing rows/columns are dropped), then a
flatten. Frames are processed independently: the (T, B) leading axes are
folded into one image batch. Convolution is im2col-based so forward and
backward are plain GEMMs.
"""

from __future__ import annotations

import numpy as np

from .errors import DimensionError
from .layers import Layer, glorot_uniform
from .rng import Prng

KERNEL = 5
CHANNELS = (8, 8, 8)


def _im2col(x, k):
    """(N, H, W, C) -> (N, H, W, k*k*C) patch matrix under same padding."""
    n, h, w, c = x.shape
    pad = k // 2
    xp = np.pad(x, ((0, 0), (pad, pad), (pad, pad), (0, 0)))
    cols = np.empty((n, h, w, k * k * c), x.dtype)
    idx = 0
    for di in range(k):
        for dj in range(k):
            cols[..., idx : idx + c] = xp[:, di : di + h, dj : dj + w, :]
            idx += c
    return cols


def _col2im(dcols, shape, k):
    """Adjoint of _im2col."""
    n, h, w, c = shape
    pad = k // 2
    dxp = np.zeros((n, h + 2 * pad, w + 2 * pad, c), dcols.dtype)
    idx = 0
    for di in range(k):
        for dj in range(k):
            dxp[:, di : di + h, dj : dj + w, :] += dcols[..., idx : idx + c]
            idx += c
    return dxp[:, pad : pad + h, pad : pad + w, :]


def _pool_forward(x):
    """2x2/stride-2 max pool; ties resolve to the first cell row-major."""
    n, h, w, c = x.shape
    h2, w2 = h // 2, w // 2
    if h2 == 0 or w2 == 0:
        raise DimensionError(f"spatial dims too small to pool: {h}x{w}")
    win = np.stack(
        [
            x[:, 0 : 2 * h2 : 2, 0 : 2 * w2 : 2, :],
            x[:, 0 : 2 * h2 : 2, 1 : 2 * w2 : 2, :],
            x[:, 1 : 2 * h2 : 2, 0 : 2 * w2 : 2, :],
            x[:, 1 : 2 * h2 : 2, 1 : 2 * w2 : 2, :],
        ],
        axis=3,
    )  # (N, h2, w2, 4, C) in row-major window order
    arg = win.argmax(axis=3)
    out = np.take_along_axis(win, arg[:, :, :, None, :], axis=3)[:, :, :, 0, :]
    return out, arg


def _pool_backward(dout, arg, shape):
    n, h, w, c = shape
    h2, w2 = h // 2, w // 2
    dwin = np.zeros((n, h2, w2, 4, c), dout.dtype)
    np.put_along_axis(dwin, arg[:, :, :, None, :], dout[:, :, :, None, :], axis=3)
    dx = np.zeros(shape, dout.dtype)
    dx[:, 0 : 2 * h2 : 2, 0 : 2 * w2 : 2, :] = dwin[:, :, :, 0, :]
    dx[:, 0 : 2 * h2 : 2, 1 : 2 * w2 : 2, :] = dwin[:, :, :, 1, :]
    dx[:, 1 : 2 * h2 : 2, 0 : 2 * w2 : 2, :] = dwin[:, :, :, 2, :]
    dx[:, 1 : 2 * h2 : 2, 1 : 2 * w2 : 2, :] = dwin[:, :, :, 3, :]
    return dx


def conv_output_dim(image_shape) -> int:
    """Flattened feature size produced by the stack for (H, W, C) frames."""
    h, w, _ = image_shape
    for _ in CHANNELS:
        h, w = h // 2, w // 2
    if h < 1 or w < 1:
        raise DimensionError(
            f"image {image_shape} too small for three pooling stages"
        )
    return h * w * CHANNELS[-1]


class ConvStack(Layer):
    """The full conv/pool/flatten pipeline over (T, B, H, W, C) frames."""

    def __init__(self, image_shape, *, prng=None, dtype=np.float32):
        super().__init__()
        self.image_shape = tuple(image_shape)
        self.d_out = conv_output_dim(self.image_shape)
        if prng is None:
            prng = Prng(0)
        c_in = self.image_shape[2]
        for j, c_out in enumerate(CHANNELS):
            fan_in = KERNEL * KERNEL * c_in
            self._register(
                f"conv{j}.w",
                glorot_uniform(
                    prng.split(j), fan_in, c_out, (fan_in, c_out), dtype
                ),
            )
            self._register(f"conv{j}.b", np.zeros(c_out, dtype))
            c_in = c_out

    @classmethod
    def share_from(cls, donor: "ConvStack"):
        layer = cls.__new__(cls)
        Layer.__init__(layer)
        layer.image_shape = donor.image_shape
        layer.d_out = donor.d_out
        layer._adopt(donor)
        return layer

    def forward(self, x, lengths=None):
        if x.ndim != 5 or x.shape[2:] != self.image_shape:
            raise DimensionError(
                f"conv stack expects (T, B, {self.image_shape}), got {x.shape}"
            )
        T, B = x.shape[:2]
        y = x.reshape(T * B, *self.image_shape)
        steps = []
        for j in range(len(CHANNELS)):
            cols = _im2col(y, KERNEL)
            pre = cols @ self.params[f"conv{j}.w"] + self.params[f"conv{j}.b"]
            act = np.tanh(pre)
            pooled, arg = _pool_forward(act)
            steps.append((y.shape, cols, act, arg))
            y = pooled
        self._cache = (T, B, steps, y.shape)
        return y.reshape(T, B, self.d_out)

    def backward(self, dy):
        T, B, steps, top_shape = self._cache
        d = np.ascontiguousarray(dy).reshape(top_shape)
        for j in range(len(CHANNELS) - 1, -1, -1):
            in_shape, cols, act, arg = steps[j]
            d = _pool_backward(d, arg, act.shape)
            d = d * (1.0 - act * act)
            flat = d.reshape(-1, d.shape[-1])
            self.grads[f"conv{j}.w"] += cols.reshape(-1, cols.shape[-1]).T @ flat
            self.grads[f"conv{j}.b"] += flat.sum(axis=0)
            d = _col2im(d @ self.params[f"conv{j}.w"].T, in_shape, KERNEL)
        return d.reshape(T, B, *self.image_shape)
