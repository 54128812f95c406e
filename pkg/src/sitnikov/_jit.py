"""JIT switch for the hot kernels.

Set ``SITNIKOV_DISABLE_JIT=1`` to run the kernels as plain Python/numpy.
Both paths execute the same source, so results agree to rounding.
"""
import os

_DISABLED = os.environ.get("SITNIKOV_DISABLE_JIT", "0").strip().lower() in ("1", "true", "yes", "on")

try:
    import numba
except ImportError:  # pragma: no cover
    numba = None

USE_NUMBA = numba is not None and not _DISABLED


def jit(fn):
    if USE_NUMBA:
        return numba.njit(cache=True, nogil=True)(fn)
    return fn
