"""Exact killed-distribution dynamic programming on the integer lattice.

At every step the sub-probability law of ``M_n`` on ``{T > n}`` is convolved
with the next increment law; mass landing in the stopping region is
harvested into the stopped totals and into a histogram of stopped values.
Everything reported is an exact expectation up to floating-point rounding
(or exactly, in rational mode), except for mass deliberately pruned at the
window edges, which is tracked as a one-sided error budget:

* ``err_mass`` bounds the probability that was discarded,
* ``err_budget`` bounds ``sum |M| * mass`` over discarded atoms, taken at
  the time they were discarded. Because ``M`` is a martingale, this is a
  rigorous bound on ``|L_n + R_n|``.
"""

from __future__ import annotations

import csv
import math
import time
from collections import defaultdict
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from . import laws as _laws
from . import process as _process
from . import stopping as _stopping
from ._backend import backend_name
from .kernels import load as _load_kernels

FLOAT_PRUNE_EPS = 1e-15


class CapabilityError(ValueError):
    """The scenario cannot be handled by the exact engine."""


@dataclass
class ExactTrace:
    p_gt_n: np.ndarray
    L: np.ndarray
    R: np.ndarray
    m2: np.ndarray
    m3: np.ndarray
    mp: dict
    stop_mass: np.ndarray
    stop_m1: np.ndarray
    err_mass: np.ndarray
    err_m1: np.ndarray
    stopped_hist: dict
    level: float
    hist_overflow: float = 0.0
    meta: dict = field(default_factory=dict)

    @property
    def N(self):
        return len(self.p_gt_n) - 1

    @property
    def exact_mode(self):
        return self.meta.get("arithmetic_mode") == "rational"

    def moment(self, p):
        """``E[|M_n|**p 1(T > n)]`` for every ``n``."""
        if p == 2:
            return self.m2
        if p == 3:
            return self.m3
        if p in self.mp:
            return self.mp[p]
        raise KeyError(f"p={p} was not requested; pass it in p_list")

    def stopped_total(self):
        """``P(T <= n)`` for every ``n``."""
        return _cumsum(self.stop_mass)

    def overshoot_hist(self):
        return {v - self.level: m for v, m in sorted(self.stopped_hist.items())}

    def normalized_overshoot(self):
        h = self.overshoot_hist()
        tot = sum(h.values())
        return {k: m / tot for k, m in h.items()} if tot else {}

    def overshoot_mean(self):
        h = self.normalized_overshoot()
        return sum(k * m for k, m in h.items()) if h else None

    def crossing_means(self):
        """``{n: E[M_T | T = n]}`` over steps with stopped mass."""
        return {
            n: self.stop_m1[n] / self.stop_mass[n]
            for n in range(1, self.N + 1)
            if self.stop_mass[n] > 0
        }

    def rows(self, p_list=None):
        extra = [p for p in (p_list or sorted(self.mp)) if p not in (2, 3)]
        header = ["n", "p_gt_n", "L_n", "R_n", "m2_alive", "m3_alive"]
        header += [f"m{_fmt_p(p)}_alive" for p in extra]
        header += ["err_mass", "err_budget"]
        yield header
        for n in range(1, self.N + 1):
            row = [n, self.p_gt_n[n], self.L[n], self.R[n], self.m2[n], self.m3[n]]
            row += [self.mp[p][n] for p in extra]
            row += [self.err_mass[n], self.err_m1[n]]
            yield [row[0]] + [repr(float(x)) for x in row[1:]]

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            csv.writer(fh).writerows(self.rows())


def _fmt_p(p):
    return str(int(p)) if float(p).is_integer() else str(p).replace(".", "_")


def _cumsum(a):
    if a.dtype == object:
        out = np.empty(a.size, dtype=object)
        acc = Fraction(0)
        for i, x in enumerate(a):
            acc += x
            out[i] = acc
        return out
    return np.cumsum(a)


# ------------------------------------------------------------------ setup


def _check_capability(spec, rule):
    if isinstance(rule, _stopping.Example1):
        raise CapabilityError("the randomized staged rule is Monte Carlo only")
    if not isinstance(rule, (_stopping.FirstAbove, _stopping.FirstExit)):
        raise CapabilityError(f"unsupported rule {rule!r}")
    if not _laws.is_lattice(spec.law):
        raise CapabilityError("non-lattice increments are Monte Carlo only")
    if spec.variant == _process.POLY2_COMPENSATED:
        raise CapabilityError("S^2 - sum X^2 is path dependent; Monte Carlo only")
    if spec.variant == _process.POLY2_VARIANCE:
        if spec.indexed or not isinstance(spec.law, _laws.C1Law):
            raise CapabilityError("S^2 - n is supported over a homogeneous C1 base")


def _step_tables(spec, N, exact):
    if not spec.indexed:
        v, m, t, t1 = _laws.lattice_step(spec.law, exact)
        return [(v, m, t, t1)]
    return [_laws.lattice_step(spec.law.law(j), exact) for j in range(1, N + 1)]


def _hist_range(spec, rule, tables, N):
    amax = max(max(v) for v, *_ in tables)
    amin = min(min(v) for v, *_ in tables)
    if spec.variant == _process.POLY2_VARIANCE:
        lo = int(math.floor(rule.h)) + 1
        reach = math.isqrt(N) + abs(amin) + 2
        return lo, max(reach * reach - lo + 1, 1)
    if isinstance(rule, _stopping.FirstExit):
        lo = int(math.floor(-rule.z)) - abs(amin) - 1
        return lo, amax - lo + 1
    lo = int(math.floor(rule.h)) + 1
    return lo, max(amax, 1)


def _rule_params(rule):
    if isinstance(rule, _stopping.FirstExit):
        return 1, 0.0, -float(rule.z)
    return 0, float(rule.h), 0.0


def propagate(spec, rule, N, prune_eps=None, arithmetic_mode="float", p_list=(2, 3), backend=None):
    """Run the killed-distribution DP for ``N`` steps.

    Args:
        spec: ``Sum`` over lattice laws, or ``S**2 - n`` over a C1 base
            (the DP then runs on ``S`` with stopping region ``S**2 - n > h``).
        rule: :class:`FirstAbove` or :class:`FirstExit`.
        N: number of steps.
        prune_eps: edge atoms with mass ``<= prune_eps`` are discarded into
            the error budget. Defaults to 1e-15 (float) or 0 (rational).
        arithmetic_mode: ``"float"`` or ``"rational"``.
        p_list: exponents for which ``E[|M_n|**p 1(T > n)]`` is recorded.
    """
    _check_capability(spec, rule)
    if N < 1:
        raise ValueError("N must be at least 1")
    if arithmetic_mode not in ("float", "rational"):
        raise ValueError(f"unknown arithmetic mode {arithmetic_mode!r}")
    exact = arithmetic_mode == "rational"
    if exact and not getattr(spec.law, "exact", False):
        raise ValueError("rational mode needs a law built from fractions")
    if prune_eps is None:
        prune_eps = 0 if exact else FLOAT_PRUNE_EPS
    t0 = time.perf_counter()
    tables = _step_tables(spec, N, exact)
    transform = 1 if spec.variant == _process.POLY2_VARIANCE else 0
    level = getattr(rule, "h", 0)
    if exact:
        trace = _propagate_rational(tables, transform, rule, N, prune_eps, p_list)
        used = "python-rational"
    else:
        trace = _propagate_float(tables, transform, rule, N, prune_eps, p_list, spec, backend)
        used = backend or backend_name()
    trace.level = level
    trace.meta.update(
        {
            "spec": spec.describe(),
            "rule": rule.describe(),
            "unit_variance": _process.has_unit_variance(spec.law),
            "N": N,
            "arithmetic_mode": arithmetic_mode,
            "prune_eps": float(prune_eps),
            "p_list": [float(p) for p in p_list],
            "backend": used,
            "runtime_s": time.perf_counter() - t0,
        }
    )
    return trace


def _propagate_float(tables, transform, rule, N, eps, p_list, spec, backend):
    width = max(len(v) for v, *_ in tables)
    S = len(tables)
    vals = np.zeros((S, width), dtype=np.int64)
    masses = np.zeros((S, width))
    tail = np.zeros(S)
    tail1 = np.zeros(S)
    for s, (v, m, t, t1) in enumerate(tables):
        vals[s, : len(v)] = v
        vals[s, len(v) :] = v[-1]
        masses[s, : len(m)] = m
        tail[s] = t
        tail1[s] = t1
    rule_kind, level, lower = _rule_params(rule)
    hist_lo, hist_size = _hist_range(spec, rule, tables, N)
    extra = [float(p) for p in p_list if p not in (2, 3)]
    k = _load_kernels("dp", backend)
    (P, L, R, m2, m3, mp, sm, s1, em, e1, hist, overflow, peak, last) = k.dp_run(
        vals, masses, tail, tail1, transform, rule_kind, level, lower, int(N), float(eps),
        np.asarray(extra, dtype=np.float64), int(hist_lo), int(hist_size),
    )
    stopped = {hist_lo + i: float(m) for i, m in enumerate(hist) if m > 0}
    return ExactTrace(
        P, L, R, m2, m3, {p: mp[i] for i, p in enumerate(extra)}, sm, s1, em, e1,
        stopped, 0, float(overflow),
        meta={"peak_width": int(peak), "extinct_at": int(last) if last < N else None},
    )


def _propagate_rational(tables, transform, rule, N, eps, p_list):
    zero = Fraction(0)
    shape = N + 1
    P = np.full(shape, zero, dtype=object)
    L, R, m2, m3 = (np.full(shape, zero, dtype=object) for _ in range(4))
    sm_a, s1_a, em_a, e1_a = (np.full(shape, zero, dtype=object) for _ in range(4))
    extra = [p for p in p_list if p not in (2, 3)]
    mp = {p: np.full(shape, zero, dtype=object) for p in extra}
    P[0] = Fraction(1)
    alive = {0: Fraction(1)}
    hist = defaultdict(Fraction)
    em = e1 = Lc = zero

    def mval(x, n):
        return x if transform == 0 else x * x - n

    def stops(M):
        return rule.stops(M)

    def powp(a, p):
        if float(p).is_integer():
            return a ** int(p)
        return float(a) ** float(p)

    for n in range(1, N + 1):
        v, q, tm, tm1 = tables[0] if len(tables) == 1 else tables[n - 1]
        if tm:
            a0 = sum(alive.values(), zero)
            a1 = sum((m * abs(x) for x, m in alive.items()), zero)
            em += tm * a0
            e1 += tm * a1 + tm1 * a0
        new = defaultdict(Fraction)
        for x, m in alive.items():
            for dv, dq in zip(v, q):
                new[x + dv] += m * dq
        sm = s1 = zero
        alive = {}
        for x, m in new.items():
            if m == 0:
                continue
            M = mval(x, n)
            if stops(M):
                sm += m
                s1 += m * M
                hist[M] += m
            elif eps and m <= eps:
                em += m
                e1 += m * abs(M)
            else:
                alive[x] = m
        Lc += s1
        P[n] = sum(alive.values(), zero)
        L[n] = Lc
        r1 = r2 = r3 = zero
        for x, m in alive.items():
            M = mval(x, n)
            r1 += m * M
            r2 += m * M * M
            r3 += m * abs(M) ** 3
            for p in extra:
                mp[p][n] += m * powp(abs(M), p)
        R[n], m2[n], m3[n] = r1, r2, r3
        sm_a[n], s1_a[n], em_a[n], e1_a[n] = sm, s1, em, e1
    return ExactTrace(
        P, L, R, m2, m3, mp, sm_a, s1_a, em_a, e1_a,
        {k: m for k, m in sorted(hist.items())}, 0,
    )


# ---------------------------------------------------------------- analyses


def conservation_residual(trace):
    """``L_n + R_n`` per step, which optional stopping at ``T ∧ n`` makes zero.

    Returns a dict with the residual array, the budget array and the
    worst-case ``|residual|``, plus the largest excess over budget.
    """
    res = trace.L + trace.R
    if res.dtype == object:
        absres = np.array([abs(x) for x in res], dtype=object)
        max_abs = max(absres[1:], default=Fraction(0))
        excess = max((a - b for a, b in zip(absres[1:], trace.err_m1[1:])), default=Fraction(0))
    else:
        absres = np.abs(res)
        max_abs = float(absres[1:].max()) if trace.N else 0.0
        excess = float((absres[1:] - trace.err_m1[1:]).max()) if trace.N else 0.0
    return {"residual": res, "budget": trace.err_m1, "max_abs": max_abs, "max_excess": excess}


def ce1_infinity_lower_bound(N, trace=None, backend=None):
    """Certified lower bound on ``P(T = inf)`` for the ``ce1`` lazy walk.

    A path still alive at ``N`` that makes no further nonzero step never
    stops, and ``P(some X_j != 0, j > N) <= sum_{j>N} j**-2 < 1/N``.
    Pruning only lowers the reported ``P(T > N)``, so the bound stays valid.
    """
    if trace is None:
        spec = _process.MartingaleSpec(_process.SUM, _laws.ce1_sequence())
        trace = propagate(spec, _stopping.FirstPositive(), N, backend=backend)
    p_alive = float(trace.p_gt_n[N])
    tail = 1.0 / N
    bound = p_alive - tail
    return {
        "N": N,
        "p_gt_N": p_alive,
        "tail_bound": tail,
        "lower_bound": bound,
        "conclusive": bound > 0,
    }
