"""Backend dispatch for the hot kernels.

The recurrent unrolls and the alignment-lattice DP dominate training
time. By default they run through numba's nopython JIT; set

    SENSEFUSE_BACKEND=numpy

before import to use the identical pure-numpy source instead (useful for
debugging and as a no-compile fallback), or =numba to require the JIT
path. ``get_kernels`` exposes both variants side by side for the
benchmark suite. Both backends execute the same source, so results agree
to floating-point library precision.
"""

from __future__ import annotations

import os
import warnings

from . import _kernels_src as _src
from .errors import ConfigError

BACKEND_ENV = "SENSEFUSE_BACKEND"
KERNEL_NAMES = ("gru_forward", "gru_backward", "ctc_alpha_beta")

_cache: dict[str, dict] = {}


def get_kernels(backend: str) -> dict:
    """Kernel table for an explicit backend ('numba' or 'numpy')."""
    if backend not in ("numba", "numpy"):
        raise ConfigError(f"unknown kernel backend {backend!r}")
    if backend not in _cache:
        if backend == "numpy":
            _cache[backend] = {name: getattr(_src, name) for name in KERNEL_NAMES}
        else:
            import numba

            jit = numba.njit(cache=True)
            _cache[backend] = {name: jit(getattr(_src, name)) for name in KERNEL_NAMES}
    return _cache[backend]


def _resolve_backend() -> str:
    requested = os.environ.get(BACKEND_ENV, "").strip().lower()
    if requested in ("", "numba"):
        try:
            import numba  # noqa: F401

            return "numba"
        except ImportError:
            if requested == "numba":
                raise
            warnings.warn(
                "numba unavailable; falling back to the pure-numpy kernel backend",
                stacklevel=2,
            )
            return "numpy"
    if requested == "numpy":
        return "numpy"
    raise ConfigError(
        f"{BACKEND_ENV} must be 'numba' or 'numpy', got {requested!r}"
    )


BACKEND = _resolve_backend()
_active = get_kernels(BACKEND)

gru_forward = _active["gru_forward"]
gru_backward = _active["gru_backward"]
ctc_alpha_beta = _active["ctc_alpha_beta"]
