"""Optional numba acceleration.

Graph kernels are written once as plain Python over numpy arrays and compiled
with ``numba.njit`` when available.  Set ``KGPATH_NO_NUMBA=1`` to run the
interpreted path instead (useful for debugging and for the benchmark).
"""
import os

USE_NUMBA = os.environ.get("KGPATH_NO_NUMBA", "").strip().lower() in ("", "0", "false", "no")

if USE_NUMBA:
    try:
        import numba
    except ImportError:  # pragma: no cover
        USE_NUMBA = False


def njit(fn):
    if USE_NUMBA:
        return numba.njit(cache=True, nogil=True)(fn)
    fn.py_func = fn
    return fn
