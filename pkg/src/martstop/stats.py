"""Order-independent moment accumulators.

Every double is ``mantissa * 2**exponent`` with a 53-bit integer mantissa, so
a sum of doubles is exactly an integer multiple of ``2**-SHIFT``. The
accumulators keep that integer (split into per-exponent bins while inside a
kernel), which makes merging plain integer addition: the result does not
depend on how paths were partitioned, the worker count, or merge order.
Means and variances are formed from the exact sums and rounded once.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

SHIFT = 1126  # 1074 (smallest subnormal) + 52 mantissa bits
NBINS = 2100
LO_BITS = 27
Z95 = 1.959963984540054


def exact_bins(x):
    """Per-exponent ``(hi, lo)`` mantissa sums of ``x``, shape ``(NBINS, 2)``.

    Partial sums stay below 2**53 for fewer than 2**26 values per call, so the
    float64 ``bincount`` is exact.
    """
    x = np.asarray(x, dtype=np.float64).ravel()
    x = x[x != 0.0]
    out = np.zeros((NBINS, 2), dtype=np.int64)
    if x.size == 0:
        return out
    if x.size >= 1 << 26:
        raise ValueError("split inputs into chunks below 2**26 values")
    if not np.all(np.isfinite(x)):
        raise ValueError("non-finite value in accumulator input")
    m, e = np.frexp(x)
    mi = (m * 9007199254740992.0).astype(np.int64)
    idx = e.astype(np.int64) - 53 + SHIFT
    sign = np.sign(mi)
    a = np.abs(mi)
    hi = (a >> LO_BITS) * sign
    lo = (a & ((1 << LO_BITS) - 1)) * sign
    out[:, 0] = np.bincount(idx, weights=hi.astype(np.float64), minlength=NBINS).astype(np.int64)
    out[:, 1] = np.bincount(idx, weights=lo.astype(np.float64), minlength=NBINS).astype(np.int64)
    return out


_SPLIT = 134217729.0  # 2**27 + 1


def square_parts(x):
    """``hi*hi``, ``2*hi*lo`` and ``lo*lo`` with ``hi + lo == x`` (Veltkamp split).

    Each part is an exact double, so the parts sum to ``x*x`` without
    rounding for ``1e-140 < |x| < 1e140``.
    """
    x = np.asarray(x, dtype=np.float64)
    c = _SPLIT * x
    hi = c - (c - x)
    lo = x - hi
    return np.concatenate([(hi * hi).ravel(), (2.0 * hi * lo).ravel(), (lo * lo).ravel()])


def bins_to_int(bins):
    """Collapse ``(NBINS, 2)`` bins into one integer scaled by ``2**SHIFT``."""
    total = 0
    for i in np.nonzero(bins[:, 0] | bins[:, 1])[0]:
        total += ((int(bins[i, 0]) << LO_BITS) + int(bins[i, 1])) << int(i)
    return total


def exact_sum(x):
    """Exact sum of a float array as an integer scaled by ``2**SHIFT``."""
    return bins_to_int(exact_bins(x))


@dataclass(frozen=True)
class ExactMoments:
    """Count and exact first/second raw sums of a sample.

    Both sums are exact for values with ``1e-140 < |x| < 1e140`` (and zero).
    """

    count: int = 0
    s1: int = 0
    s2: int = 0

    @classmethod
    def from_array(cls, x):
        x = np.asarray(x, dtype=np.float64)
        return cls(int(x.size), exact_sum(x), exact_sum(square_parts(x)))

    def __add__(self, other):
        return ExactMoments(self.count + other.count, self.s1 + other.s1, self.s2 + other.s2)

    @property
    def mean(self):
        if self.count == 0:
            return math.nan
        return float(Fraction(self.s1, self.count << SHIFT))

    @property
    def var(self):
        n = self.count
        if n < 2:
            return 0.0
        num = Fraction((n * self.s2 << SHIFT) - self.s1 * self.s1, 1 << (2 * SHIFT))
        return float(num / (n * (n - 1)))

    @property
    def se(self):
        return math.sqrt(max(self.var, 0.0) / self.count) if self.count else math.nan

    def ci(self, z=Z95):
        m, s = self.mean, self.se
        return [m - z * s, m + z * s]

    def summary(self):
        return {"count": self.count, "mean": self.mean, "se": self.se, "ci95": self.ci()}


def normal_ci(mean, se, z=Z95):
    return mean - z * se, mean + z * se
