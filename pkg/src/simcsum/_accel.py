"""Numba switch shared by every hot kernel.

Set ``SIMCSUM_DISABLE_NUMBA=1`` before import to force the pure-numpy paths
(useful for debugging and for checking that both paths agree).
"""

import os

_FLAG = os.environ.get("SIMCSUM_DISABLE_NUMBA", "").strip().lower()
DISABLED_BY_ENV = _FLAG in {"1", "true", "yes", "on"}

try:
    import numba
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None

NUMBA_ENABLED = numba is not None and not DISABLED_BY_ENV


def njit(func):
    """Compile ``func`` with numba when enabled, else return it untouched."""
    if not NUMBA_ENABLED:
        return func
    return numba.njit(cache=True, nogil=True)(func)
