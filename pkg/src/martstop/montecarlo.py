"""Seeded, partitioned Monte Carlo estimates of stopped-martingale quantities.

Paths are split into a fixed number of partitions. Partition ``i`` draws from
its own PCG64 stream spawned from ``SeedSequence(seed)``, with a second
independent stream for auxiliary coins (randomized stopping). Workers only
decide which thread runs a partition; results are combined with exact
integer accumulators, so reports are byte-identical for any worker count and
a merge of disjoint partition sets equals the run over their union.

Paths still running at the horizon ``N_max`` are censored, never restarted.
Their contribution is exactly what ``R_n = E[M_n 1(T > n)]`` measures: the
gap between ``L_{N_max}`` and ``L`` is ``-R_{N_max}`` in the limit.
"""

from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import laws as _laws
from . import process as _process
from . import stopping as _stopping
from ._backend import backend_name
from .kernels import load as _load_kernels
from .stats import ExactMoments, Z95, bins_to_int

QUANTITIES = ("p_gt_n", "R_n", "L_n", "m2_alive", "stopped_value", "abs_stopped_value",
              "abs_stopped_value_finite")
NQ = len(QUANTITIES)
MAX_CE2_HORIZON = 999
HORIZON_NOTE = (
    "paths alive at N_max are censored; the truncated estimate L_N differs "
    "from L by the limit of R_n, and L_n + R_n = 0 holds at every checkpoint"
)


def default_checkpoints(n_max):
    """1-2-5 ladder up to ``n_max`` (always including ``n_max``)."""
    out = set()
    dec = 1
    while dec <= n_max:
        for k in (1, 2, 5):
            if k * dec <= n_max:
                out.add(k * dec)
        dec *= 10
    out.add(n_max)
    return sorted(out)


def decade_checkpoints(n_max):
    out = []
    dec = 10
    while dec <= n_max:
        out.append(dec)
        dec *= 10
    if not out or out[-1] != n_max:
        out.append(n_max)
    return out


def partition_sizes(paths, partitions):
    base, extra = divmod(paths, partitions)
    return [base + (1 if i < extra else 0) for i in range(partitions)]


def partition_streams(seed, partitions):
    """``[(increment_rng, aux_rng)]`` for every partition index."""
    out = []
    for child in np.random.SeedSequence(seed).spawn(partitions):
        inc, aux = child.spawn(2)
        out.append((np.random.Generator(np.random.PCG64(inc)),
                    np.random.Generator(np.random.PCG64(aux))))
    return out


@dataclass
class _PartitionResult:
    moments: list  # [C][NQ] ExactMoments
    T: np.ndarray
    Mf: np.ndarray
    maxabs: float
    reached: np.ndarray
    accepted: np.ndarray
    acc_maxabs: float


def _moments_from_bins(bins, C, count):
    out = []
    for c in range(C):
        row = []
        for q in range(NQ):
            r = 2 * (c * NQ + q)
            row.append(ExactMoments(count, bins_to_int(bins[r]), bins_to_int(bins[r + 1])))
        out.append(row)
    return out


@dataclass
class McReport:
    spec: dict
    rule: dict
    seed: int
    partitions: int
    partition_ids: list
    paths: int
    N_max: int
    checkpoints: list
    moments: list  # [C][NQ] ExactMoments
    censored: int
    max_abs_M: float
    backend: str
    level: float = 0.0
    overshoot: ExactMoments = field(default_factory=ExactMoments)
    overshoot_max: float = 0.0
    stage_reached: list = field(default_factory=list)
    stage_accepted: list = field(default_factory=list)
    accepted_max_abs: float = 0.0
    T: np.ndarray | None = None
    M_final: np.ndarray | None = None

    # -- estimates ---------------------------------------------------------
    def estimate(self, name, n=None):
        """ExactMoments of quantity ``name`` at checkpoint ``n`` (last by default)."""
        c = len(self.checkpoints) - 1 if n is None else self.checkpoints.index(n)
        return self.moments[c][QUANTITIES.index(name)]

    def series(self, name):
        return [self.moments[c][QUANTITIES.index(name)] for c in range(len(self.checkpoints))]

    @property
    def censored_fraction(self):
        return self.censored / self.paths if self.paths else 0.0

    def identity_rows(self):
        """``L_n + R_n`` estimate (the mean of ``M_{T∧n}``) with its z-score."""
        rows = []
        for n, m in zip(self.checkpoints, self.series("stopped_value")):
            z = m.mean / m.se if m.se > 0 else (0.0 if m.mean == 0 else math.inf)
            rows.append({"n": n, "mean": m.mean, "se": m.se, "z": z})
        return rows

    # -- merge -------------------------------------------------------------
    def merge(self, other):
        """Combine reports over disjoint partitions of the same run."""
        same = ("spec", "rule", "seed", "partitions", "N_max", "checkpoints", "level", "backend")
        for key in same:
            if getattr(self, key) != getattr(other, key):
                raise ValueError(f"cannot merge reports that differ in {key}")
        if set(self.partition_ids) & set(other.partition_ids):
            raise ValueError("reports share partitions")
        ids = sorted(self.partition_ids + other.partition_ids)
        moments = [[a + b for a, b in zip(ra, rb)] for ra, rb in zip(self.moments, other.moments)]
        T = M = None
        if self.T is not None and other.T is not None:
            first, second = (self, other) if self.partition_ids[0] < other.partition_ids[0] else (other, self)
            T = np.concatenate([first.T, second.T])
            M = np.concatenate([first.M_final, second.M_final])
        width = max(len(self.stage_reached), len(other.stage_reached))
        pad = lambda a: list(a) + [0] * (width - len(a))  # noqa: E731
        return McReport(
            self.spec, self.rule, self.seed, self.partitions, ids,
            self.paths + other.paths, self.N_max, self.checkpoints, moments,
            self.censored + other.censored, max(self.max_abs_M, other.max_abs_M), self.backend,
            self.level, self.overshoot + other.overshoot,
            max(self.overshoot_max, other.overshoot_max),
            [a + b for a, b in zip(pad(self.stage_reached), pad(other.stage_reached))],
            [a + b for a, b in zip(pad(self.stage_accepted), pad(other.stage_accepted))],
            max(self.accepted_max_abs, other.accepted_max_abs), T, M,
        )

    # -- output ------------------------------------------------------------
    def to_dict(self):
        rows = []
        for c, n in enumerate(self.checkpoints):
            row = {"n": n}
            for q, name in enumerate(QUANTITIES):
                row[name] = self.moments[c][q].summary()
            m = self.moments[c][QUANTITIES.index("stopped_value")]
            row["identity_L_plus_R"] = {"mean": m.mean, "se": m.se}
            rows.append(row)
        out = {
            "kind": "mc_report",
            "spec": self.spec,
            "rule": self.rule,
            "seed": self.seed,
            "partitions": self.partitions,
            "partition_ids": self.partition_ids,
            "paths": self.paths,
            "N_max": self.N_max,
            "backend": self.backend,
            "checkpoints": self.checkpoints,
            "rows": rows,
            "censored": self.censored,
            "censored_fraction": self.censored_fraction,
            "max_abs_M": self.max_abs_M,
            "horizon_bias": {
                "R_at_horizon": self.estimate("R_n").summary(),
                "note": HORIZON_NOTE,
            },
            "overshoot": dict(self.overshoot.summary(), level=self.level, max=self.overshoot_max),
            "ci_level": 0.95,
            "z": Z95,
        }
        if any(self.stage_reached):
            out["example1"] = {
                "stage_reached": self.stage_reached,
                "stage_accepted": self.stage_accepted,
                "accepted_max_abs_M": self.accepted_max_abs,
            }
        return out

    def to_json(self, extra=None):
        d = self.to_dict()
        if extra:
            d.update(extra)
        return json.dumps(d, sort_keys=True, indent=2)

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        header = ["n"]
        for name in QUANTITIES:
            header += [name, f"se_{name}"]
        w.writerow(header)
        for c, n in enumerate(self.checkpoints):
            row = [n]
            for q in range(NQ):
                m = self.moments[c][q]
                row += [repr(m.mean), repr(m.se)]
            w.writerow(row)
        return buf.getvalue()


# -------------------------------------------------------------- compilation


def _compile(spec, rule, n_max):
    law = spec.law
    if isinstance(law, _laws.IndexedLawSequence) and law.name == "ce2" and n_max > MAX_CE2_HORIZON:
        raise ValueError(f"CE2 increments overflow doubles beyond j={MAX_CE2_HORIZON}")
    kind, vals, cums, c3 = _laws.compile_for_mc(law, n_max)
    variant = _process.VARIANTS.index(spec.variant)
    ex = (0.0, 0, 0)
    if isinstance(rule, _stopping.FirstAbove):
        rk, level, lower = 0, float(rule.h), 0.0
    elif isinstance(rule, _stopping.FirstExit):
        rk, level, lower = 1, 0.0, -float(rule.z)
    elif isinstance(rule, _stopping.Example1):
        rk, level, lower = 2, 0.0, 0.0
        ex = (float(rule.L), int(rule.first_stage), int(rule.max_stage or 0))
    else:
        raise ValueError(f"unsupported rule {rule!r}")
    return kind, vals, cums, c3, variant, rk, level, lower, ex


def _validate(paths, n_max, checkpoints, partitions):
    if paths <= 0:
        raise ValueError("paths must be positive")
    if n_max <= 0:
        raise ValueError("N_max must be positive")
    if partitions <= 0:
        raise ValueError("partitions must be positive")
    ck = sorted(set(int(c) for c in (checkpoints or default_checkpoints(n_max))))
    if ck[0] < 1 or ck[-1] > n_max:
        raise ValueError("checkpoints must lie in [1, N_max]")
    return np.asarray(ck, dtype=np.int64)


def _run_partitions(job, seed, partitions, ids, workers):
    streams = partition_streams(seed, partitions)
    todo = [(i, streams[i]) for i in ids]
    if workers <= 1:
        return [job(i, s) for i, s in todo]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda a: job(*a), todo))


def _assemble(results, spec, rule, seed, partitions, ids, paths, n_max, ck, backend, level,
              keep_paths):
    C = len(ck)
    moments = results[0].moments
    for r in results[1:]:
        moments = [[a + b for a, b in zip(ra, rb)] for ra, rb in zip(moments, r.moments)]
    T = np.concatenate([r.T for r in results])
    Mf = np.concatenate([r.Mf for r in results])
    stopped = T >= 0
    over = Mf[stopped] - level
    reached = sum(r.reached for r in results)
    accepted = sum(r.accepted for r in results)
    last = int(np.nonzero(reached)[0].max()) + 1 if reached.any() else 0
    report = McReport(
        spec, rule, seed, partitions, list(ids), int(sum(r.T.size for r in results)), n_max,
        [int(c) for c in ck], moments, int((~stopped).sum()),
        float(max(r.maxabs for r in results)), backend, float(level),
        ExactMoments.from_array(over) if over.size else ExactMoments(),
        float(over.max()) if over.size else 0.0,
        [int(x) for x in reached[:last]], [int(x) for x in accepted[:last]],
        float(max(r.acc_maxabs for r in results)),
    )
    if keep_paths:
        report.T, report.M_final = T, Mf
    assert len(report.moments) == C
    return report


def estimate(spec, rule, N_max, paths, seed, checkpoints=None, partitions=8, workers=1,
             partition_ids=None, keep_paths=False, backend=None):
    """Simulate ``paths`` paths to stopping or ``N_max`` and summarise.

    Returns an :class:`McReport` with, at every checkpoint ``n``, estimates
    of ``P(T > n)``, ``R_n``, ``L_n``, ``E[M_n**2 1(T > n)]`` and of
    ``M_{T∧n}`` (whose mean is the optional-stopping residual ``L_n + R_n``).
    """
    ck = _validate(paths, N_max, checkpoints, partitions)
    kind, vals, cums, c3, variant, rk, level, lower, ex = _compile(spec, rule, N_max)
    k = _load_kernels("mc", backend)
    sizes = partition_sizes(paths, partitions)
    ids = list(range(partitions)) if partition_ids is None else sorted(partition_ids)

    def job(i, streams):
        rng, aux = streams
        out = k.mc_run(rng, aux, kind, vals, cums, c3, variant, rk, level, lower,
                       ex[0], ex[1], ex[2], sizes[i], int(N_max), ck)
        return _PartitionResult(_moments_from_bins(out[0], len(ck), sizes[i]), *out[1:])

    results = _run_partitions(job, seed, partitions, ids, workers)
    return _assemble(results, spec.describe(), rule.describe(), seed, partitions, ids,
                     paths, N_max, ck, backend or backend_name(), level, keep_paths)


def example1_demo(L, stages, N_max, paths, seed, checkpoints=None, first_stage=2,
                  partitions=8, workers=1, backend=None):
    """Staged randomized stopping over the simple random walk.

    Returns a dict with the :class:`McReport`, the growth curve of
    ``E|M_{T*∧n}|`` over checkpoints and whether it is strictly increasing,
    the estimate of ``E|M_{T*}| 1(T* <= N_max)`` (bounded by ``L``), and
    per-stage acceptance frequencies.
    """
    ck = _validate(paths, N_max, checkpoints or decade_checkpoints(N_max), partitions)
    k = _load_kernels("mc", backend)
    sizes = partition_sizes(paths, partitions)
    ids = list(range(partitions))

    def job(i, streams):
        rng, aux = streams
        out = k.srw_example1_run(rng, aux, float(L), int(first_stage), int(stages),
                                 sizes[i], int(N_max), ck)
        return _PartitionResult(_moments_from_bins(out[0], len(ck), sizes[i]), *out[1:])

    results = _run_partitions(job, seed, partitions, ids, workers)
    rule = _stopping.Example1(float(L), first_stage, stages)
    spec = _process.MartingaleSpec(_process.SUM, _laws.make_c1(_laws.simple_random_walk(False)))
    report = _assemble(results, spec.describe(), rule.describe(), seed, partitions, ids,
                       paths, N_max, ck, backend or backend_name(), 0.0, keep_paths=True)
    curve = [
        {"n": n, "mean": m.mean, "se": m.se}
        for n, m in zip(report.checkpoints, report.series("abs_stopped_value"))
    ]
    curve_finite = [
        {"n": n, "mean": m.mean, "se": m.se}
        for n, m in zip(report.checkpoints, report.series("abs_stopped_value_finite"))
    ]
    means = [c["mean"] for c in curve]
    stopped = report.T >= 0
    stopped_abs = np.abs(report.M_final[stopped])
    freq = []
    for j, (r, a) in enumerate(zip(report.stage_reached, report.stage_accepted)):
        if r:
            p = a / r
            freq.append({"stage": j, "coins": r, "accepted": a, "frequency": p,
                         "expected": 1.0 / (j * j), "se": math.sqrt(p * (1 - p) / r)})
    return {
        "report": report,
        "L": float(L),
        "stages": int(stages),
        "growth_curve": curve,
        "growth_curve_on_finite": curve_finite,
        "strictly_increasing": all(b > a for a, b in zip(means, means[1:])),
        "stopped_abs_mean": ExactMoments.from_array(np.abs(report.M_final) * stopped).summary(),
        "max_abs_at_accepted_stop": float(stopped_abs.max()) if stopped_abs.size else 0.0,
        "all_stops_below_L": bool(np.all(stopped_abs < L)),
        "acceptance": freq,
        "stopped_fraction": float(stopped.mean()),
    }


def wobble_profile(spec, k_list, window, eps_list, paths, seed, partitions=8, workers=1,
                   backend=None):
    """Empirical ``P(sup_{k < n <= k+window} |M_n - M_k| > eps)`` per ``(k, eps)``.

    A finite-window stand-in for the wobble condition; returns a dict with the
    proxy matrix (rows ``k``, columns ``eps``) and its binomial standard errors.
    """
    ks = np.asarray(sorted(int(k) for k in k_list), dtype=np.int64)
    eps = np.asarray([float(e) for e in eps_list])
    if paths <= 0 or window <= 0 or ks.size == 0 or ks[0] < 1:
        raise ValueError("need positive paths, window and k values")
    horizon = int(ks.max() + window)
    kind, vals, cums, c3 = _laws.compile_for_mc(spec.law, horizon)
    variant = _process.VARIANTS.index(spec.variant)
    k = _load_kernels("mc", backend)
    sizes = partition_sizes(paths, partitions)

    def job(i, streams):
        rng, _ = streams
        return k.wobble_run(rng, kind, vals, cums, c3, variant, ks, int(window), eps, sizes[i])

    counts = sum(_run_partitions(job, seed, partitions, list(range(partitions)), workers))
    proxy = counts / paths
    return {
        "k": ks.tolist(),
        "eps": eps.tolist(),
        "window": int(window),
        "paths": int(paths),
        "proxy": proxy.tolist(),
        "se": np.sqrt(proxy * (1 - proxy) / paths).tolist(),
    }


def overshoot_condition_estimate(spec, rule, n_list, paths, seed, B=None, min_count=30,
                                 partitions=8, workers=1, backend=None):
    """Per-``n`` mean of the crossing value among paths whose first crossing is at ``n``.

    Steps with fewer than ``min_count`` crossings are reported as ``None``
    (no data), never as zero.
    """
    if not isinstance(rule, _stopping.FirstAbove) or rule.h != 0:
        raise ValueError("the crossing condition is defined for the first-positive rule")
    n_list = sorted(int(n) for n in n_list)
    rep = estimate(spec, rule, n_list[-1], paths, seed, checkpoints=[n_list[-1]],
                   partitions=partitions, workers=workers, keep_paths=True, backend=backend)
    rows = []
    for n in n_list:
        vals = rep.M_final[rep.T == n]
        if vals.size < min_count:
            rows.append({"n": n, "count": int(vals.size), "mean": None, "se": None})
            continue
        m = ExactMoments.from_array(vals)
        rows.append({"n": n, "count": m.count, "mean": m.mean, "se": m.se})
    with_data = [r["mean"] for r in rows if r["mean"] is not None]
    sup = max(with_data) if with_data else None
    return {
        "rows": rows,
        "sup": sup,
        "B": B,
        "bounded_by_B": None if (B is None or sup is None) else sup <= B,
        "report": rep,
    }
