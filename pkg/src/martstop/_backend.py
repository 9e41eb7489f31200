"""Kernel backend selection.

Hot loops are compiled with numba when it is importable. Setting
``MARTSTOP_DISABLE_NUMBA=1`` forces the pure-numpy implementations, which
produce the same exact-engine numbers (up to summation order) and
statistically equivalent Monte Carlo streams.
"""

import os

try:
    import numba  # noqa: F401

    _HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    _HAVE_NUMBA = False


def _flag(name):
    return os.environ.get(name, "").strip().lower() in ("1", "true", "yes", "on")


USE_NUMBA = _HAVE_NUMBA and not _flag("MARTSTOP_DISABLE_NUMBA")


def backend_name():
    return "numba" if USE_NUMBA else "numpy"


def optional_njit(*args, **kwargs):
    """``numba.njit`` when enabled, identity otherwise."""

    def decorator(func):
        if USE_NUMBA:
            from numba import njit

            return njit(*args, **kwargs)(func)
        return func

    return decorator
