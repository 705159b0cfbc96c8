"""Switch between numba-compiled kernels and their pure-Python/numpy fallbacks.

Set ``GENSCORE_DISABLE_NUMBA=1`` before import to run every kernel as plain
Python.  The Gibbs kernels run the same source either way; the assembly and
coordinate-descent kernels have vectorized numpy twins.  Both paths agree up
to floating-point rounding.
"""

import os

_flag = os.environ.get("GENSCORE_DISABLE_NUMBA", "").strip().lower()
DISABLED = _flag not in ("", "0", "false", "no")

try:
    import numba as _numba
except ImportError:  # pragma: no cover - numba is a declared dependency
    _numba = None

USE_NUMBA = _numba is not None and not DISABLED


def njit(*args, **kwargs):
    """``numba.njit`` when enabled, otherwise an identity decorator."""
    if USE_NUMBA:
        kwargs.setdefault("cache", True)
        kwargs.setdefault("nogil", True)
        return _numba.njit(*args, **kwargs)
    if len(args) == 1 and callable(args[0]) and not kwargs:
        return args[0]

    def wrap(fn):
        return fn

    return wrap


def backend():
    return "numba" if USE_NUMBA else "python"
