"""Optional numba acceleration.

Set ``CLUTTERREACH_DISABLE_NUMBA=1`` to run every kernel as plain Python/numpy.
The kernels are written so both paths execute the same arithmetic.
"""

import os

_FALSE = {"", "0", "false", "no", "off"}

DISABLED = os.environ.get("CLUTTERREACH_DISABLE_NUMBA", "").strip().lower() not in _FALSE

try:
    if DISABLED:
        raise ImportError
    import numba

    NUMBA_AVAILABLE = True
except ImportError:
    numba = None
    NUMBA_AVAILABLE = False


def jit(*args, **kwargs):
    """``numba.njit`` when available and enabled, identity decorator otherwise."""
    if NUMBA_AVAILABLE:
        kwargs.setdefault("cache", True)
        return numba.njit(*args, **kwargs)
    if len(args) == 1 and callable(args[0]) and not kwargs:
        return args[0]
    return lambda fn: fn


def backend_name():
    return "numba" if NUMBA_AVAILABLE else "numpy"
