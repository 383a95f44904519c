"""Central finite-difference verification of analytic gradients.

``grad_check`` perturbs parameters in place (restoring them exactly),
so the supplied loss function must be pure: repeated calls at the same
parameters must return the same value. Run fragments in float64; float32
roundoff swamps the difference quotient.

The error measure is relative with an absolute floor: near-zero entries
are judged by absolute difference so finite-difference roundoff cannot
masquerade as a gradient bug.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .rng import Prng

DEFAULT_STEP = 1e-5
ERROR_FLOOR = 1e-3


@dataclass
class GradCheckReport:
    tolerance: float
    max_rel_error: float = 0.0
    worst: tuple = ()
    per_tensor: dict = field(default_factory=dict)
    failures: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.failures

    def summary(self) -> str:
        status = "pass" if self.passed else f"FAIL ({len(self.failures)} elements)"
        return (
            f"grad check {status}: max rel error {self.max_rel_error:.3e} "
            f"(tolerance {self.tolerance:.1e}, worst at {self.worst})"
        )


def grad_check(
    loss_fn,
    params: dict,
    tolerance: float,
    *,
    step: float = DEFAULT_STEP,
    max_elements: int = 64,
    seed: int = 0,
) -> GradCheckReport:
    """Compare analytic gradients against central differences.

    loss_fn() -> (loss, grads) evaluated at the current params; grads is
    a dict sharing the keys of ``params``. Tensors larger than
    ``max_elements`` are spot-checked on a deterministic random subset.
    """
    _, analytic = loss_fn()
    analytic = {k: np.array(v, copy=True) for k, v in analytic.items()}
    report = GradCheckReport(tolerance=tolerance)
    prng = Prng(seed).split("gradcheck")
    for name, tensor in params.items():
        flat = tensor.reshape(-1)
        n = flat.size
        if n <= max_elements:
            indices = np.arange(n)
        else:
            u = prng.random(max_elements)
            indices = np.unique((u * n).astype(np.int64))
        worst_t = 0.0
        for idx in indices:
            original = flat[idx]
            flat[idx] = original + step
            up, _ = loss_fn()
            flat[idx] = original - step
            down, _ = loss_fn()
            flat[idx] = original
            numeric = (up - down) / (2.0 * step)
            a = float(analytic[name].reshape(-1)[idx])
            rel = abs(a - numeric) / max(abs(a), abs(numeric), ERROR_FLOOR)
            if rel > worst_t:
                worst_t = rel
            if rel > report.max_rel_error:
                report.max_rel_error = rel
                report.worst = (name, int(idx))
            if rel >= tolerance:
                report.failures.append((name, int(idx), rel))
        report.per_tensor[name] = worst_t
    return report
