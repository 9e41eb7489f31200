"""Hot loops for the exact and Monte Carlo engines.

Each kernel exists twice: ``*_numba`` (compiled, used by default) and
``*_numpy`` (vectorised fallback, selected with ``MARTSTOP_DISABLE_NUMBA=1``
or by passing ``backend="numpy"`` to an engine).
"""

import importlib

from .._backend import USE_NUMBA

_MODULES = {"dp": "dp", "mc": "mc"}


def load(kind, backend=None):
    if backend is None:
        backend = "numba" if USE_NUMBA else "numpy"
    if backend not in ("numba", "numpy"):
        raise ValueError(f"unknown backend {backend!r}")
    return importlib.import_module(f"{__name__}.{_MODULES[kind]}_{backend}")
