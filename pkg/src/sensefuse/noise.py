"""Time-varying Gaussian corruption with bounded random-walk level schedules.

A schedule assigns one noise standard deviation per frame. Training
schedules follow a random walk with gamma-distributed step sizes and
uniformly random step signs, kept inside [0, sigma_max] by a triangular
reflection map instead of a discontinuous wrap. The walk starts at a
uniform draw from the lower half of the range, so frame 0 carries no
settle-in bias regardless of sequence length.

Evaluation schedules (sweep, burst, sinusoid, constant) are deterministic
closed forms clamped to the same range; they exist to probe how a trained
model reacts to level dynamics it never saw during training.

Levels are unitless multiples of the normalized feature standard
deviation. All schedule math runs in float64; corruption is cast to the
feature dtype at mixing time.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DimensionError, EmptySequenceError
from .rng import Prng

DEFAULT_SIGMA_MAX = 3.0
DEFAULT_GAMMA_SHAPE = 0.8
DEFAULT_GAMMA_SCALE = 0.2


@dataclass(frozen=True)
class WalkConfig:
    """Parameters of the bounded random-walk level process."""

    sigma_max: float = DEFAULT_SIGMA_MAX
    gamma_shape: float = DEFAULT_GAMMA_SHAPE
    gamma_scale: float = DEFAULT_GAMMA_SCALE
    sigma0_upper: float | None = None  # default sigma_max / 2

    def __post_init__(self):
        if self.sigma_max <= 0:
            raise ConfigError(f"sigma_max must be > 0, got {self.sigma_max}")
        if self.gamma_shape <= 0 or self.gamma_scale <= 0:
            raise ConfigError(
                "gamma walk parameters must be > 0, got "
                f"shape={self.gamma_shape}, scale={self.gamma_scale}"
            )
        if self.sigma0_upper is None:
            object.__setattr__(self, "sigma0_upper", self.sigma_max / 2.0)
        elif not 0.0 <= self.sigma0_upper <= self.sigma_max:
            raise ConfigError(
                f"sigma0_upper must lie in [0, sigma_max], got {self.sigma0_upper}"
            )


@dataclass
class NoiseSchedule:
    """Per-frame noise standard deviations plus stream provenance."""

    sigma: np.ndarray
    seed_info: tuple = ()

    def __len__(self):
        return len(self.sigma)

    def to_csv(self, path) -> None:
        """Write frame,sigma rows for plotting."""
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("frame,sigma\n")
            for t, s in enumerate(self.sigma):
                fh.write(f"{t},{float(s)!r}\n")


@dataclass(frozen=True)
class NoiseProfileSpec:
    """Deterministic evaluation profile. ``params`` are kind-specific:

    - linear_sweep: start, end
    - burst: onset, duration, level
    - sinusoid: amplitude, period, phase, offset
    - constant: level
    - random_walk: seed (pass-through to the walk process)
    """

    kind: str
    params: dict = field(default_factory=dict)
    sigma_max: float = DEFAULT_SIGMA_MAX

    KINDS = ("random_walk", "linear_sweep", "burst", "sinusoid", "constant")

    def __post_init__(self):
        if self.kind not in self.KINDS:
            raise ConfigError(
                f"unknown noise profile kind {self.kind!r}; expected one of {self.KINDS}"
            )
        if self.sigma_max <= 0:
            raise ConfigError(f"sigma_max must be > 0, got {self.sigma_max}")


def reflect(a, sigma_max: float):
    """Triangular reflection of ``a`` into [0, sigma_max].

    Uses the floor-based modulus, then folds the second half-period back,
    which is continuous (1-Lipschitz), 2*sigma_max-periodic, and even.
    Accepts scalars or arrays.
    """
    if sigma_max <= 0:
        raise ConfigError(f"sigma_max must be > 0, got {sigma_max}")
    a = np.asarray(a, dtype=np.float64)
    period = 2.0 * sigma_max
    m = a - period * np.floor(a / period)
    out = sigma_max - np.abs(m - sigma_max)
    return float(out) if out.ndim == 0 else out


def walk_schedule(prng: Prng, config: WalkConfig, length: int) -> NoiseSchedule:
    """Bounded random-walk schedule of ``length`` frames.

    Frame 0 is the uniform start level itself; each later frame adds a
    gamma-sized step with a uniformly random sign (sign of 0 counts as
    positive) before reflection into range.
    """
    if length < 1:
        raise EmptySequenceError("schedule length must be >= 1")
    sigma0 = prng.uniform(0.0, config.sigma0_upper)
    path = np.empty(length)
    path[0] = sigma0
    if length > 1:
        signs = np.where(prng.uniform(-1.0, 1.0, length - 1) >= 0.0, 1.0, -1.0)
        steps = prng.gamma(config.gamma_shape, config.gamma_scale, length - 1)
        path[1:] = sigma0 + np.cumsum(signs * steps)
    return NoiseSchedule(
        sigma=reflect(path, config.sigma_max), seed_info=(prng.seed, "walk")
    )


def profile_schedule(spec: NoiseProfileSpec, length: int) -> NoiseSchedule:
    """Deterministic schedule of the requested shape, clamped to range."""
    if length < 1:
        raise EmptySequenceError("schedule length must be >= 1")
    p = spec.params
    t = np.arange(length, dtype=np.float64)
    if spec.kind == "linear_sweep":
        start = float(p.get("start", 0.0))
        end = float(p.get("end", spec.sigma_max))
        frac = t / max(length - 1, 1)
        sigma = start + (end - start) * frac
    elif spec.kind == "burst":
        onset = int(p.get("onset", length // 3))
        duration = int(p.get("duration", max(length // 6, 1)))
        level = float(p.get("level", 2.0))
        sigma = np.zeros(length)
        sigma[onset : onset + duration] = level
    elif spec.kind == "sinusoid":
        amplitude = float(p.get("amplitude", spec.sigma_max / 2.0))
        period = float(p.get("period", 100.0))
        phase = float(p.get("phase", 0.0))
        offset = float(p.get("offset", spec.sigma_max / 2.0))
        sigma = offset + amplitude * np.sin(2.0 * np.pi * t / period + phase)
    elif spec.kind == "constant":
        sigma = np.full(length, float(p.get("level", 0.0)))
    elif spec.kind == "random_walk":
        cfg = WalkConfig(
            sigma_max=spec.sigma_max,
            gamma_shape=float(p.get("gamma_shape", DEFAULT_GAMMA_SHAPE)),
            gamma_scale=float(p.get("gamma_scale", DEFAULT_GAMMA_SCALE)),
        )
        return walk_schedule(Prng(int(p.get("seed", 0))), cfg, length)
    else:  # unreachable; __post_init__ validates
        raise ConfigError(f"unknown noise profile kind {spec.kind!r}")
    return NoiseSchedule(
        sigma=np.clip(sigma, 0.0, spec.sigma_max), seed_info=("profile", spec.kind)
    )


def apply_noise(prng: Prng, features: np.ndarray, schedule: NoiseSchedule) -> np.ndarray:
    """Return a corrupted copy of a (T, D) feature matrix.

    Every element of frame t receives an independent N(0, sigma(t)^2)
    draw; the level is shared across the feature dimension within a
    frame. The input array is never mutated.
    """
    x = np.asarray(features)
    if x.ndim != 2:
        raise DimensionError(f"features must be (T, D), got shape {x.shape}")
    T, D = x.shape
    if len(schedule.sigma) != T:
        raise DimensionError(
            f"schedule length {len(schedule.sigma)} != sequence length {T}"
        )
    draws = prng.normal(T * D).reshape(T, D) * schedule.sigma[:, None]
    return x + draws.astype(x.dtype)
