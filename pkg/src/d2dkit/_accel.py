"""Numba switch.

Set ``D2DKIT_NUMBA=0`` in the environment to force the pure-numpy fallbacks
(useful for debugging and for the benchmark comparison).
"""

import os

try:
    import numba
except ImportError:  # pragma: no cover
    numba = None

USE_NUMBA = numba is not None and os.environ.get("D2DKIT_NUMBA", "1") not in ("0", "false", "no")


def njit(fn):
    """``numba.njit(cache=True, nogil=True)`` when available, identity otherwise."""
    if numba is None:  # pragma: no cover
        return fn
    return numba.njit(cache=True, nogil=True)(fn)
