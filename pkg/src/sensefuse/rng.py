"""Deterministic, splittable random number generation.

The generator is SplitMix64: a 64-bit counter advanced by a fixed odd
increment, pushed through a bijective finalizer to produce each output
word. It is documented, tiny, and bit-exact across platforms, which is
what every stochastic draw in this package is built on.

Streams are split by value, not by sharing: ``Prng.split(*ids)`` derives
a child seed from (root seed, ids) with the same finalizer, so any
(seed, stream path) pair names one reproducible stream regardless of how
much the parent has been consumed. Stream ids may be ints or strings;
strings are hashed to 64-bit ints with blake2b.

All sampling is done in float64. Gamma deviates use the Marsaglia-Tsang
squeeze method, with the standard boost for shape < 1.
"""

from __future__ import annotations

import hashlib

import numpy as np

from .errors import ConfigError

_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB

_U64_GOLDEN = np.uint64(_GOLDEN)
_U64_MIX1 = np.uint64(_MIX1)
_U64_MIX2 = np.uint64(_MIX2)

_INV_2_53 = float(2.0 ** -53)


def _mix64(x: int) -> int:
    """SplitMix64 finalizer on a Python int, mod 2**64."""
    x &= _MASK64
    x = ((x ^ (x >> 30)) * _MIX1) & _MASK64
    x = ((x ^ (x >> 27)) * _MIX2) & _MASK64
    return x ^ (x >> 31)


def _id_to_int(stream_id) -> int:
    if isinstance(stream_id, (int, np.integer)):
        return int(stream_id) & _MASK64
    if isinstance(stream_id, str):
        digest = hashlib.blake2b(stream_id.encode("utf-8"), digest_size=8).digest()
        return int.from_bytes(digest, "little")
    raise ConfigError(f"stream id must be int or str, got {type(stream_id).__name__}")


class Prng:
    """SplitMix64 stream. Single-owner: never share one instance across
    concurrent consumers; split child streams up front instead."""

    algorithm_id = "splitmix64"

    def __init__(self, seed: int):
        self.seed = int(seed) & _MASK64
        self._state = self.seed

    def __repr__(self):
        return f"Prng(seed=0x{self.seed:016x}, algorithm={self.algorithm_id})"

    def split(self, *ids) -> "Prng":
        """Derive an independent child stream from (root seed, ids)."""
        s = _mix64(self.seed ^ _GOLDEN)
        for w in ids:
            s = _mix64((s + _GOLDEN) ^ _mix64(_id_to_int(w) + _GOLDEN))
        return Prng(s)

    # -- raw words ---------------------------------------------------------

    def next_u64(self, n: int) -> np.ndarray:
        """Next n output words as a uint64 array."""
        idx = np.arange(1, n + 1, dtype=np.uint64)
        with np.errstate(over="ignore"):
            z = np.uint64(self._state) + _U64_GOLDEN * idx
            z = (z ^ (z >> np.uint64(30))) * _U64_MIX1
            z = (z ^ (z >> np.uint64(27))) * _U64_MIX2
            z = z ^ (z >> np.uint64(31))
        self._state = (self._state + _GOLDEN * n) & _MASK64
        return z

    # -- distributions -----------------------------------------------------

    def random(self, n: int | None = None):
        """Uniform float64 in [0, 1)."""
        out = (self.next_u64(n if n is not None else 1) >> np.uint64(11)).astype(
            np.float64
        ) * _INV_2_53
        return float(out[0]) if n is None else out

    def uniform(self, lo: float, hi: float, n: int | None = None):
        """Uniform float64 in [lo, hi)."""
        return lo + (hi - lo) * self.random(n)

    def normal(self, n: int | None = None):
        """Standard normal draws via the Box-Muller transform."""
        m = n if n is not None else 1
        pairs = (m + 1) // 2
        u = (self.next_u64(2 * pairs) >> np.uint64(11)).astype(np.float64)
        u1 = (u[:pairs] + 1.0) * _INV_2_53  # (0, 1], keeps log finite
        u2 = u[pairs:] * _INV_2_53
        r = np.sqrt(-2.0 * np.log(u1))
        theta = (2.0 * np.pi) * u2
        z = np.empty(2 * pairs)
        z[0::2] = r * np.cos(theta)
        z[1::2] = r * np.sin(theta)
        return float(z[0]) if n is None else z[:m]

    def gamma(self, shape: float, scale: float, n: int | None = None):
        """Gamma(shape, scale) draws, Marsaglia-Tsang method.

        For shape < 1 a Gamma(shape + 1) deviate is drawn and boosted by
        U**(1/shape). Rejection passes redraw failed lanes in a fixed
        order, so the stream consumption is deterministic.
        """
        if shape <= 0.0 or scale <= 0.0:
            raise ConfigError(
                f"gamma parameters must be positive, got shape={shape}, scale={scale}"
            )
        m = n if n is not None else 1
        boosted = shape < 1.0
        k = shape + 1.0 if boosted else shape
        d = k - 1.0 / 3.0
        c = 1.0 / np.sqrt(9.0 * d)
        out = np.empty(m)
        pending = np.arange(m)
        while pending.size:
            x = self.normal(pending.size)
            u = self.random(pending.size)
            v = (1.0 + c * x) ** 3
            pos = v > 0.0
            with np.errstate(divide="ignore", invalid="ignore"):
                squeeze = u < 1.0 - 0.0331 * x ** 4
                logtest = np.log(u) < 0.5 * x * x + d * (1.0 - v + np.log(v))
            accept = pos & (squeeze | logtest)
            out[pending[accept]] = d * v[accept]
            pending = pending[~accept]
        if boosted:
            out *= self.random(m) ** (1.0 / shape)
        out *= scale
        return float(out[0]) if n is None else out
