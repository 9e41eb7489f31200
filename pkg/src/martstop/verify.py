"""Finite-horizon, tolerance-explicit checks of optional-stopping statements.

Every check takes an :class:`~martstop.exact.ExactTrace` or a
:class:`~martstop.montecarlo.McReport` (or both) and returns a
:class:`CheckResult`. Limit statements are restated over the last decade of
``n`` (``N/window .. N``). Checks are pure: identical inputs and tolerances
give identical results.
"""

from __future__ import annotations

import hashlib
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from fractions import Fraction

import numpy as np

from . import laws as _laws
from . import stopping as _stopping
from .exact import ExactTrace, ce1_infinity_lower_bound, conservation_residual
from .montecarlo import McReport
from .stats import SHIFT

PASS, FAIL, INCONCLUSIVE = "pass", "fail", "inconclusive"
EXACT_TOL = 1e-10
MC_SIGMAS = 4.0
SQRT_PI_2 = math.sqrt(math.pi / 2)
SQRT_2_PI = math.sqrt(2 / math.pi)


@dataclass(frozen=True)
class CheckResult:
    check_name: str
    status: str
    observed: dict
    tolerance: dict
    inputs_digest: str
    notes: list = field(default_factory=list)

    @property
    def passed(self):
        return self.status == PASS

    def to_dict(self):
        return _jsonable(asdict(self))


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (np.bool_, bool)):
        return bool(x)
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (np.floating, float)):
        return float(x)
    if hasattr(x, "numerator") and hasattr(x, "denominator") and not isinstance(x, int):
        return float(x)
    return x


def digest(*items):
    """Stable SHA-256 over traces, reports, arrays and JSON-able values."""
    h = hashlib.sha256()
    for it in items:
        if isinstance(it, ExactTrace):
            h.update(json.dumps(_jsonable(it.meta.get("spec")), sort_keys=True).encode())
            h.update(json.dumps(_jsonable(it.meta.get("rule")), sort_keys=True).encode())
            for arr in (it.p_gt_n, it.L, it.R, it.m2, it.err_m1):
                h.update(np.asarray(arr, dtype=np.float64).tobytes())
        elif isinstance(it, McReport):
            h.update(it.to_json().encode())
        elif isinstance(it, np.ndarray):
            h.update(np.ascontiguousarray(it).tobytes())
        else:
            h.update(json.dumps(_jsonable(it), sort_keys=True, default=repr).encode())
    return h.hexdigest()[:16]


def _decade(N, window):
    return max(1, N // window), N


def _f(a):
    return np.asarray([float(x) for x in a]) if np.asarray(a).dtype == object else np.asarray(a, dtype=float)


# ---------------------------------------------------------------- identity


def check_theorem31(source, tol=EXACT_TOL, delta_tol=1e-3, window=10, sigmas=MC_SIGMAS):
    """``L_n + R_n = 0`` at every ``n`` and ``L_n`` flat over the last decade.

    For a trace the identity must hold to ``tol`` plus the pruning budget and
    every step of ``L_n`` inside the last decade must move by at most
    ``delta_tol``; the fitted power decay of those steps is reported (an
    exponent below -1 means the remaining tail is summable). For a report the identity is tested at each checkpoint to
    ``sigmas`` standard errors, and the decade change of ``L`` must not exceed
    ``delta_tol`` per step plus ``sigmas`` combined standard errors.
    """
    name = "theorem31_conservation"
    if isinstance(source, McReport):
        return _theorem31_mc(source, tol, delta_tol, window, sigmas, name)
    t = source
    res = conservation_residual(t)
    excess = float(res["max_excess"])
    identity_ok = excess <= tol
    lo, hi = _decade(t.N, window)
    L = _f(t.L)
    steps = np.abs(np.diff(L[lo:hi + 1])) if hi > lo else np.zeros(1)
    max_step = float(steps.max())
    flat_ok = max_step <= delta_tol
    idx = np.nonzero(steps > 0)[0]
    decay = _fit_rate(lo + 1 + idx, steps[idx]) if idx.size >= 2 else None
    obs = {
        "N": t.N,
        "L_N": float(L[t.N]),
        "R_N": float(t.R[t.N]),
        "P_T_le_N": 1.0 - float(t.p_gt_n[t.N]),
        "max_abs_residual": float(res["max_abs"]),
        "max_excess_over_budget": excess,
        "budget_N": float(t.err_m1[t.N]),
        "decade": [lo, hi],
        "max_step_dL": max_step,
        "step_decay_exponent": decay,
        "decade_change_L": float(abs(L[hi] - L[lo])),
        "identity_ok": identity_ok,
        "flat_ok": flat_ok,
    }
    status = PASS if identity_ok and flat_ok else FAIL
    return CheckResult(name, status, obs, {"tol": tol, "delta_tol": delta_tol, "window": window},
                       digest(t, tol, delta_tol, window))


def _theorem31_mc(r, tol, delta_tol, window, sigmas, name):
    rows = r.identity_rows()
    worst = max((abs(x["mean"]) - sigmas * x["se"] for x in rows), default=0.0)
    identity_ok = worst <= tol
    lo, hi = _decade(r.N_max, window)
    inside = [n for n in r.checkpoints if lo <= n <= hi]
    flat_ok = True
    change = 0.0
    allowed = 0.0
    if len(inside) >= 2:
        a, b = r.estimate("L_n", inside[0]), r.estimate("L_n", inside[-1])
        change = abs(b.mean - a.mean)
        allowed = delta_tol * (inside[-1] - inside[0]) + sigmas * math.hypot(a.se, b.se)
        flat_ok = change <= allowed
    obs = {
        "N_max": r.N_max,
        "L_N": r.estimate("L_n").mean,
        "R_N": r.estimate("R_n").mean,
        "identity": rows,
        "worst_excess": worst,
        "decade_checkpoints": inside,
        "decade_change_L": change,
        "allowed_change": allowed,
        "identity_ok": identity_ok,
        "flat_ok": flat_ok,
    }
    status = PASS if identity_ok and flat_ok else FAIL
    return CheckResult(name, status, obs,
                       {"tol": tol, "delta_tol": delta_tol, "window": window, "sigmas": sigmas},
                       digest(r, tol, delta_tol, window, sigmas))


# ------------------------------------------------------------- corollaries


def check_corollary32(trace, p, tol=1e-6, window=10):
    """``min a_n >= |L_N|**(p/(p-1)) - tol`` over the last decade.

    ``a_n = P(T > n) * E[|M_n|**p 1(T > n)]**(1/(p-1))``.
    """
    if not p > 1:
        raise ValueError("the moment exponent p must exceed 1")
    t = trace
    mom = _f(t.moment(p))
    P = _f(t.p_gt_n)
    lo, hi = _decade(t.N, window)
    a = P[lo:hi + 1] * mom[lo:hi + 1] ** (1.0 / (p - 1))
    L_N = float(t.L[t.N])
    bound = abs(L_N) ** (p / (p - 1))
    a_min = float(a.min())
    obs = {
        "p": p,
        "N": t.N,
        "decade": [lo, hi],
        "a_min": a_min,
        "a_N": float(a[-1]),
        "a_max": float(a.max()),
        "L_N": L_N,
        "bound": bound,
        "slack": a_min - bound,
    }
    status = PASS if a_min >= bound - tol else FAIL
    return CheckResult(f"corollary32_p{p:g}", status, obs, {"tol": tol, "window": window},
                       digest(t, p, tol, window))


def check_corollary33(trace, tol=1e-6, window=10, n_from=None):
    """``n P(T > n) >= L_N**2 - tol`` over the last decade (or from ``n_from``).

    Needs a base martingale with unit conditional variance.
    """
    t = trace
    if not t.meta.get("unit_variance", False):
        raise ValueError("needs a base martingale with unit conditional variance")
    lo, hi = _decade(t.N, window) if n_from is None else (int(n_from), t.N)
    n = np.arange(lo, hi + 1)
    v = n * _f(t.p_gt_n)[lo:hi + 1]
    L_N = float(t.L[t.N])
    bound = L_N * L_N
    obs = {
        "N": t.N,
        "range": [lo, hi],
        "min_n_p_gt_n": float(v.min()),
        "argmin_n": int(n[int(v.argmin())]),
        "n_p_gt_n_at_N": float(v[-1]),
        "L_N_squared": bound,
    }
    status = PASS if float(v.min()) >= bound - tol else FAIL
    return CheckResult("corollary33", status, obs, {"tol": tol, "window": window, "n_from": n_from},
                       digest(t, tol, window, n_from))


def check_application_constants(trace, tol=0.02, const_tol=0.01):
    """Random-walk constants at ``n = N``.

    Passes iff ``P(T>N) E[M_N**2 1(T>N)]`` is within ``tol`` (relative) of 1.
    ``sqrt(N) P(T>N)`` and ``E[M_N**2 1(T>N)] / sqrt(N)`` are each matched
    against ``sqrt(pi/2)`` and ``sqrt(2/pi)``; the stated assignment is the
    first to the former and the second to the latter.
    """
    t = trace
    N = t.N
    P = float(t.p_gt_n[N])
    m2 = float(t.m2[N])
    product = P * m2
    sp = math.sqrt(N) * P
    ms = m2 / math.sqrt(N)
    consts = {"sqrt(pi/2)": SQRT_PI_2, "sqrt(2/pi)": SQRT_2_PI}

    def match(x):
        rel = {k: abs(x / c - 1) for k, c in consts.items()}
        best = min(rel, key=rel.get)
        return {"value": x, "relative_error": rel,
                "matches": best if rel[best] <= const_tol else None}

    sp_m, ms_m = match(sp), match(ms)
    stated = {"sqrt_n_p_gt_n": "sqrt(pi/2)", "m2_over_sqrt_n": "sqrt(2/pi)"}
    obs = {
        "N": N,
        "product": product,
        "product_relative_error": abs(product - 1),
        "product_at_1": float(t.p_gt_n[1]) * float(t.m2[1]) if N >= 1 else None,
        "sqrt_n_p_gt_n": sp_m,
        "m2_over_sqrt_n": ms_m,
        "stated_assignment": stated,
        "stated_assignment_holds": sp_m["matches"] == stated["sqrt_n_p_gt_n"]
        and ms_m["matches"] == stated["m2_over_sqrt_n"],
        "assignment_found": {"sqrt_n_p_gt_n": sp_m["matches"], "m2_over_sqrt_n": ms_m["matches"]},
    }
    notes = []
    if N < 100_000:
        notes.append("horizon below 1e5; constants not yet settled")
    status = PASS if abs(product - 1) <= tol else FAIL
    return CheckResult("application_constants", status, obs, {"tol": tol, "const_tol": const_tol},
                       digest(t, tol, const_tol), notes)


# --------------------------------------------------------- bounded overshoot


def _stopped_minus(r, c):
    """Mean and standard error of ``(M_T - c) 1(T <= N)`` over all paths."""
    o, k, n = r.overshoot, r.overshoot.count, r.paths
    s1 = float(Fraction(o.s1, 1 << SHIFT))
    s2 = float(Fraction(o.s2, 1 << SHIFT))
    d = r.level - c
    t1 = s1 + d * k
    t2 = s2 + 2 * d * s1 + d * d * k
    mean = t1 / n
    var = max(t2 / n - mean * mean, 0.0) * n / max(n - 1, 1)
    return mean, math.sqrt(var / n)


def check_theorem33(source, L_candidate, tol=EXACT_TOL, crossing=None, crossing_tol=None,
                    sigmas=MC_SIGMAS):
    """``L_N <= L_candidate * P(T <= N)`` with equality under constant crossing means.

    ``crossing`` maps ``n`` to ``(mean, se)`` of ``M_T`` given ``T = n``;
    for a trace it defaults to the exact per-step crossing means. When every
    crossing mean equals ``L_candidate`` (within ``crossing_tol`` plus
    ``sigmas`` standard errors) the check also requires equality.
    """
    Lc = float(L_candidate)
    if isinstance(source, McReport):
        gap, se = _stopped_minus(source, Lc)
        slack = sigmas * se + tol
        budget = 0.0
        L_N = source.estimate("L_n").mean
        P_stop = 1.0 - source.estimate("p_gt_n").mean
    else:
        t = source
        L_N = float(t.L[t.N])
        P_stop = 1.0 - float(t.p_gt_n[t.N])
        budget = float(t.err_m1[t.N]) + abs(Lc) * float(t.err_mass[t.N])
        gap = L_N - Lc * P_stop
        se = 0.0
        slack = tol + budget
        if crossing is None:
            crossing = {n: (float(m), 0.0) for n, m in t.crossing_means().items()}
    ctol = tol if crossing_tol is None else crossing_tol
    equal_means = bool(crossing) and all(
        abs(m - Lc) <= ctol + sigmas * s for m, s in crossing.values()
    )
    inequality_ok = gap <= slack
    equality_ok = abs(gap) <= slack if equal_means else None
    worst = max((abs(m - Lc) for m, _ in crossing.values()), default=None) if crossing else None
    obs = {
        "L_N": L_N,
        "P_T_le_N": P_stop,
        "L_candidate": Lc,
        "gap": gap,
        "gap_se": se,
        "allowed": slack,
        "crossing_steps": len(crossing) if crossing else 0,
        "max_crossing_deviation": worst,
        "equality_asserted": equal_means,
        "inequality_ok": inequality_ok,
        "equality_ok": equality_ok,
    }
    ok = inequality_ok and (equality_ok is not False)
    return CheckResult("theorem33_bounded_overshoot", PASS if ok else FAIL, obs,
                       {"tol": tol, "crossing_tol": ctol, "sigmas": sigmas, "budget": budget},
                       digest(source, Lc, tol, ctol, sigmas, sorted(crossing.items()) if crossing else None))


# ----------------------------------------------------------- finiteness of T


def _fit_rate(ns, ps):
    ok = [(n, p) for n, p in zip(ns, ps) if p > 0]
    if len(ok) < 2:
        return None
    x = np.log([n for n, _ in ok])
    y = np.log([p for _, p in ok])
    return float(np.polyfit(x, y, 1)[0])


def certified_infinity_bound(spec, trace=None):
    """Analytic or exact-DP lower bound on ``P(T = inf)``, when one exists."""
    law = spec.law
    if isinstance(law, _laws.IndexedLawSequence) and law.name == "ce1" and trace is not None:
        b = ce1_infinity_lower_bound(trace.N, trace)
        return {"source": "exact alive mass minus tail of nonzero steps", **b}
    if isinstance(law, _laws.IndexedLawSequence) and law.name == "ce2":
        q = float(_laws.ce2_no_jump_probability(50))
        return {"source": "probability that no large increment ever occurs",
                "lower_bound": q, "conclusive": q > 0}
    return None


def check_theorem41(spec, rule, reports, B=1.0, tol=1e-6, window=10, min_rate=0.1,
                    vanish=1e-12, sigmas=MC_SIGMAS):
    """Whether ``T`` is finite and ``E M_T <= B`` on the available horizon.

    ``reports`` may hold ``trace`` (exact), ``mc`` (:class:`McReport`),
    ``wobble`` (:func:`~martstop.montecarlo.wobble_profile` output) and
    ``crossing`` (:func:`~martstop.montecarlo.overshoot_condition_estimate`
    output). The conclusion holds when ``P(T > n)`` decays at a fitted
    power rate of at least ``min_rate`` over the last decade (or has
    vanished) and ``L_N <= B + tol``. A failing conclusion is reported as
    ``fail`` only when a strictly positive lower bound on ``P(T = inf)`` is
    certified; otherwise the result is ``inconclusive``. The wobble and
    crossing data are attached as evidence and never decide the status.
    """
    if not (isinstance(rule, _stopping.FirstAbove) and rule.h == 0):
        raise ValueError("the finiteness check is stated for the first-positive rule")
    trace, mc = reports.get("trace"), reports.get("mc")
    if trace is None and mc is None:
        raise ValueError("need an exact trace or a Monte Carlo report")
    if trace is not None:
        N = trace.N
        lo, hi = _decade(N, window)
        ns = np.unique(np.geomspace(lo, hi, 32).astype(int))
        P = _f(trace.p_gt_n)
        ps = P[ns]
        P_N, L_N, L_slack = float(P[N]), float(trace.L[N]), float(trace.err_m1[N])
    else:
        N = mc.N_max
        lo, hi = _decade(N, window)
        ns = [n for n in mc.checkpoints if lo <= n <= hi]
        ps = [mc.estimate("p_gt_n", n).mean for n in ns]
        P_N, L_N = mc.estimate("p_gt_n").mean, mc.estimate("L_n").mean
        L_slack = sigmas * mc.estimate("L_n").se
    rate = _fit_rate(ns, ps)
    vanished = P_N <= vanish
    decays = vanished or (rate is not None and -rate >= min_rate)
    bounded = L_N <= B + tol + L_slack
    conclusion = bool(decays and bounded)
    cert = certified_infinity_bound(spec, trace)
    certified = cert is not None and cert["lower_bound"] > tol
    if mc is not None and cert is not None and certified:
        p = mc.estimate("p_gt_n")
        cert["mc_p_gt_N"] = p.mean
        cert["mc_consistent"] = p.mean >= cert["lower_bound"] - sigmas * p.se
    evidence = {}
    if reports.get("wobble") is not None:
        w = reports["wobble"]
        evidence["wobble_proxy"] = {"k": w["k"], "eps": w["eps"], "window": w["window"],
                                    "proxy": w["proxy"]}
    if reports.get("crossing") is not None:
        c = reports["crossing"]
        evidence["crossing_sup"] = c["sup"]
        evidence["crossing_rows"] = c["rows"]
        evidence["crossing_bounded_by_B"] = None if c["sup"] is None else c["sup"] <= B
    obs = {
        "N": N,
        "P_T_gt_N": P_N,
        "fitted_rate": rate,
        "decays": decays,
        "L_N": L_N,
        "B": B,
        "bounded": bounded,
        "conclusion_holds": conclusion,
        "certified_infinity_bound": cert,
        "evidence": evidence,
    }
    if conclusion:
        status = PASS
    elif certified:
        status = FAIL
    else:
        status = INCONCLUSIVE
    return CheckResult("theorem41_finiteness", status, obs,
                       {"tol": tol, "window": window, "min_rate": min_rate, "vanish": vanish,
                        "sigmas": sigmas},
                       digest(trace if trace is not None else mc, B, tol, window, min_rate))


# -------------------------------------------------------- auxiliary checks


def check_overshoot_law(trace, expected, tol=EXACT_TOL):
    """Normalized stopped-overshoot histogram against ``expected`` atom by atom."""
    got = {int(k): float(v) for k, v in trace.normalized_overshoot().items()}
    keys = sorted(set(got) | set(int(k) for k in expected))
    diffs = {k: abs(got.get(k, 0.0) - float(expected.get(k, 0.0))) for k in keys}
    worst = max(diffs.values(), default=0.0)
    obs = {
        "max_atom_error": worst,
        "overshoot_mean": trace.overshoot_mean(),
        "atoms": len(got),
        "hist_overflow": float(trace.hist_overflow),
    }
    return CheckResult("overshoot_law", PASS if worst <= tol else FAIL, obs, {"tol": tol},
                       digest(trace, sorted(expected.items()), tol))


def check_example1_growth(demo, L=None):
    """Accepted stops lie strictly inside ``(-L, L)`` and ``E|M_{T∧n}|`` strictly grows."""
    L = demo["L"] if L is None else L
    below = demo["max_abs_at_accepted_stop"] < L
    obs = {
        "growth_curve": demo["growth_curve"],
        "strictly_increasing": demo["strictly_increasing"],
        "max_abs_at_accepted_stop": demo["max_abs_at_accepted_stop"],
        "stopped_fraction": demo["stopped_fraction"],
        "acceptance": demo["acceptance"],
    }
    ok = below and demo["strictly_increasing"]
    return CheckResult("example1_growth", PASS if ok else FAIL, obs, {"L": L},
                       digest(demo["report"], L))


CHECKS = {
    "theorem31": check_theorem31,
    "corollary32": check_corollary32,
    "corollary33": check_corollary33,
    "application_constants": check_application_constants,
    "theorem33": check_theorem33,
    "theorem41": check_theorem41,
    "overshoot_law": check_overshoot_law,
    "example1_growth": check_example1_growth,
}


# -------------------------------------------------------------------- suite


@dataclass
class SuiteOutcome:
    results: list  # [(entry dict, CheckResult)]
    failed: bool

    def rows(self):
        out = []
        for entry, res in self.results:
            expect = entry.get("expect", PASS)
            out.append({
                "id": entry.get("id", res.check_name),
                "check": res.check_name,
                "status": res.status,
                "expect": expect,
                "outcome": _outcome(res.status, expect),
            })
        return out

    def to_dict(self):
        return {
            "failed": self.failed,
            "summary": self.rows(),
            "results": [dict(res.to_dict(), id=e.get("id", res.check_name),
                             expect=e.get("expect", PASS), note=e.get("note"))
                        for e, res in self.results],
        }

    def table(self):
        rows = self.rows()
        if not rows:
            return "(empty suite)"
        w = max(len(r["id"]) for r in rows)
        lines = [f"{'id':<{w}}  {'status':<12}  {'expect':<12}  outcome"]
        for r in rows:
            lines.append(f"{r['id']:<{w}}  {r['status']:<12}  {r['expect']:<12}  {r['outcome']}")
        return "\n".join(lines)


def _outcome(status, expect):
    if status == expect:
        return "ok" if expect == PASS else f"expected-{expect}"
    return "MISMATCH"


def run_suite(entries, evaluate, workers=1):
    """Run suite entries and compare each status with its expectation.

    ``entries`` is a list of dicts with at least ``check`` (and usually
    ``scenario``, ``params``, ``expect``); ``evaluate(entry)`` turns one entry
    into a :class:`CheckResult`. Results keep the entry order. The suite
    fails iff some status differs from its expectation.
    """
    for e in entries:
        if e.get("check") not in CHECKS:
            raise KeyError(f"unknown check {e.get('check')!r}")
    if workers > 1 and len(entries) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(evaluate, entries))
    else:
        results = [evaluate(e) for e in entries]
    pairs = list(zip(entries, results))
    failed = any(_outcome(r.status, e.get("expect", PASS)) == "MISMATCH" for e, r in pairs)
    return SuiteOutcome(pairs, failed)
