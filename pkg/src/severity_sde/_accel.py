"""Backend selection for the hot kernels.

Set ``SEVERITY_SDE_DISABLE_NUMBA=1`` to force the pure-numpy path even when
numba is importable. The flag is read once, at import time.
"""
import os

_flag = os.environ.get("SEVERITY_SDE_DISABLE_NUMBA", "").strip().lower()
DISABLED = _flag not in ("", "0", "false", "no")

try:
    import numba
except ImportError:  # pragma: no cover - exercised only without numba
    numba = None

HAVE_NUMBA = numba is not None
USE_NUMBA = HAVE_NUMBA and not DISABLED
BACKEND = "numba" if USE_NUMBA else "numpy"


def njit(func):
    """``numba.njit(cache=True, nogil=True)`` when available, else identity."""
    if not HAVE_NUMBA:
        return func
    return numba.njit(cache=True, nogil=True)(func)
