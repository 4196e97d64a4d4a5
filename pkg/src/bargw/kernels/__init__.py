"""Hot loops with two interchangeable backends.

The compiled numba backend is used when numba imports; setting the
environment variable ``BARGW_DISABLE_NUMBA=1`` forces the pure numpy one.
Both expose the same functions and produce identical results.
"""

import os

from . import _numpy_impl

_OFF = os.environ.get("BARGW_DISABLE_NUMBA", "").strip().lower() in {"1", "true", "yes", "on"}

_impl = _numpy_impl
BACKEND = "numpy"
if not _OFF:
    try:
        from . import _numba_impl

        _impl = _numba_impl
        BACKEND = "numba"
    except ImportError:  # numba missing or broken
        pass


def get_backend(name: str | None = None):
    """Return the kernel module for ``name`` ("numpy" or "numba"); default is the active one."""
    if name is None:
        return _impl
    if name == "numpy":
        return _numpy_impl
    if name == "numba":
        from . import _numba_impl

        return _numba_impl
    raise ValueError(f"unknown backend {name!r}")


pattern_counts = _impl.pattern_counts
family_moments = _impl.family_moments
residuals = _impl.residuals
residual_sums = _impl.residual_sums
draw_patterns = _impl.draw_patterns
spawn = _impl.spawn

__all__ = [
    "BACKEND",
    "get_backend",
    "pattern_counts",
    "family_moments",
    "residuals",
    "residual_sums",
    "draw_patterns",
    "spawn",
]
