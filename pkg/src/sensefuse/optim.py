"""ADAM with bias correction plus global-norm gradient clipping.

Updates mutate the parameter arrays in place so every layer aliasing a
tensor (weight sharing) sees the step. Moments are stored per tensor in
the parameter dtype.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionError, NumericError


@dataclass
class AdamState:
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)

    @classmethod
    def for_params(cls, params: dict, *, lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8):
        state = cls(lr=lr, beta1=beta1, beta2=beta2, eps=eps)
        state.m = {k: np.zeros_like(p) for k, p in params.items()}
        state.v = {k: np.zeros_like(p) for k, p in params.items()}
        return state


def adam_step(params: dict, grads: dict, state: AdamState) -> None:
    """One bias-corrected update; raises NumericError on NaN gradients."""
    state.step += 1
    t = state.step
    correction1 = 1.0 - state.beta1 ** t
    correction2 = 1.0 - state.beta2 ** t
    scale = state.lr * np.sqrt(correction2) / correction1
    for name, p in params.items():
        g = grads[name]
        if g.shape != p.shape:
            raise DimensionError(
                f"gradient shape {g.shape} != parameter shape {p.shape} for {name}"
            )
        if not np.all(np.isfinite(g)):
            raise NumericError(f"non-finite gradient in tensor {name!r} at step {t}")
        m = state.m[name]
        v = state.v[name]
        m += (1.0 - state.beta1) * (g - m)
        v += (1.0 - state.beta2) * (g * g - v)
        p -= (scale * m / (np.sqrt(v) + state.eps)).astype(p.dtype)


def clip_global_norm(grads: dict, max_norm: float) -> float:
    """Scale all gradients so their joint L2 norm is at most max_norm."""
    total = 0.0
    for g in grads.values():
        total += float(np.sum(g.astype(np.float64) ** 2))
    norm = float(np.sqrt(total))
    if max_norm > 0 and norm > max_norm:
        factor = max_norm / norm
        for g in grads.values():
            g *= factor
    return norm
