"""Martingales built from increment laws.

Three variants are supported: the partial-sum martingale ``S_n``, the
compensated square ``S_n**2 - sum X_j**2`` and, for unit-variance
increments, ``S_n**2 - n``. The per-path ``init``/``step`` functions here
are the reference implementation; the engines use compiled kernels that
follow the same update rules.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from . import laws as _laws

SUM = "sum"
POLY2_COMPENSATED = "poly2_compensated"
POLY2_VARIANCE = "poly2_variance"
VARIANTS = (SUM, POLY2_COMPENSATED, POLY2_VARIANCE)

VARIANCE_TOL = 1e-12
# indexed sequences are probed over this many leading indices
_INDEXED_PROBE = 64


class SpecError(ValueError):
    pass


@dataclass(frozen=True)
class MartingaleSpec:
    variant: str
    law: object  # IncrementLaw or IndexedLawSequence

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise SpecError(f"unknown variant {self.variant!r}")
        if self.variant == POLY2_VARIANCE and not has_unit_variance(self.law):
            raise SpecError("S_n**2 - n needs unit-variance increments")

    @property
    def indexed(self):
        return isinstance(self.law, _laws.IndexedLawSequence)

    def law_at(self, j):
        """Law of the ``j``-th increment (``j >= 1``)."""
        return self.law.law(j) if self.indexed else self.law

    def describe(self):
        return {"variant": self.variant, "law": _laws.describe(self.law)}


def has_unit_variance(law):
    if isinstance(law, _laws.IndexedLawSequence):
        try:
            return all(
                abs(float(_laws.law_variance(law.law(j))) - 1) <= VARIANCE_TOL
                for j in range(1, _INDEXED_PROBE + 1)
            )
        except _laws.LawError:
            return False
    return abs(float(_laws.law_variance(law)) - 1) <= VARIANCE_TOL


@dataclass(frozen=True)
class PathState:
    n: int
    M: float
    S: float
    sumsq: float
    rng: object = None


def init(spec, rng=None):
    return PathState(0, 0, 0, 0, rng)


def martingale_value(variant, S, sumsq, n):
    if variant == SUM:
        return S
    if variant == POLY2_COMPENSATED:
        return S * S - sumsq
    return S * S - n


def advance(state, spec, x):
    """Apply increment ``x`` deterministically (no randomness consumed)."""
    n = state.n + 1
    S = state.S + x
    sumsq = state.sumsq + x * x
    return replace(state, n=n, S=S, sumsq=sumsq, M=martingale_value(spec.variant, S, sumsq, n))


def step(state, spec):
    x = _laws.sample(spec.law_at(state.n + 1), state.rng)
    return advance(state, spec, x)


def path(spec, n_steps, rng):
    """Return ``(M_1..M_n, S_1..S_n)`` for one simulated path."""
    st = init(spec, rng)
    Ms, Ss = [], []
    for _ in range(n_steps):
        st = step(st, spec)
        Ms.append(st.M)
        Ss.append(st.S)
    return np.asarray(Ms, dtype=float), np.asarray(Ss, dtype=float)


def conditional_variance_check(spec, n_max, paths, seed=0):
    """Empirical per-step increment variance of the base sum.

    Returns a dict with per-step variance estimates, 95% normal CIs on them,
    the exact variances when the laws are available, and whether the base
    qualifies for ``S_n**2 - n``.
    """
    rng = np.random.default_rng(seed)
    rows = []
    for j in range(1, n_max + 1):
        law = spec.law_at(j)
        x = _laws.base_law(law).sample(rng, paths)
        v = float(np.var(x, ddof=1))
        # variance of the sample variance, via the fourth central moment
        m4 = float(np.mean((x - x.mean()) ** 4))
        se = math.sqrt(max(m4 - v * v, 0.0) / paths)
        rows.append(
            {
                "j": j,
                "variance": v,
                "ci": [v - 1.96 * se, v + 1.96 * se],
                "exact": float(_laws.law_variance(law)),
            }
        )
    eligible = has_unit_variance(spec.law)
    return {"steps": rows, "unit_variance": eligible, "poly2_variance_eligible": eligible}
