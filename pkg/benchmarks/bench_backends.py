"""Compare the numba and numpy kernels on the exact DP and Monte Carlo engines.

    python benchmarks/bench_backends.py --dp-n 20000 --mc-paths 20000

The first numba call per kernel is a compile (or cache load) and is timed
separately from the steady-state repeats.
"""

import argparse
import json
import time

import numpy as np

from martstop import exact, laws, montecarlo, process, stopping


def _srw():
    return process.MartingaleSpec(process.SUM, laws.make_c1(laws.simple_random_walk(False)))


def _timed(fn, repeats):
    t0 = time.perf_counter()
    first = fn()
    warm = time.perf_counter() - t0
    runs = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        runs.append(time.perf_counter() - t0)
    return first, warm, float(np.median(runs)) if runs else warm


def bench_dp(n, repeats):
    spec, rule = _srw(), stopping.FirstPositive()
    out = {}
    for be in ("numba", "numpy"):
        tr, warm, med = _timed(lambda: exact.propagate(spec, rule, n, backend=be), repeats)
        out[be] = {"first_s": warm, "median_s": med, "p_gt_N": float(tr.p_gt_n[-1])}
    out["max_abs_diff_p_gt_n"] = abs(out["numba"]["p_gt_N"] - out["numpy"]["p_gt_N"])
    return out


def bench_mc(paths, n_max, repeats):
    spec, rule = _srw(), stopping.FirstPositive()
    out = {}
    for be in ("numba", "numpy"):
        rep, warm, med = _timed(
            lambda: montecarlo.estimate(spec, rule, n_max, paths, 1, backend=be), repeats)
        p = rep.estimate("p_gt_n")
        out[be] = {"first_s": warm, "median_s": med, "p_gt_N": p.mean, "se": p.se}
    a, b = out["numba"], out["numpy"]
    out["z_between_backends"] = (a["p_gt_N"] - b["p_gt_N"]) / np.hypot(a["se"], b["se"])
    return out


def bench_example1(paths, n_max, repeats):
    out = {}
    for be in ("numba", "numpy"):
        d, warm, med = _timed(
            lambda: montecarlo.example1_demo(1, 5, n_max, paths, 1, backend=be), repeats)
        out[be] = {"first_s": warm, "median_s": med, "stopped_fraction": d["stopped_fraction"]}
    return out


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--dp-n", type=int, default=20000)
    ap.add_argument("--mc-paths", type=int, default=20000)
    ap.add_argument("--mc-nmax", type=int, default=1000)
    ap.add_argument("--ex1-paths", type=int, default=5000)
    ap.add_argument("--ex1-nmax", type=int, default=100000)
    ap.add_argument("--repeats", type=int, default=3)
    ap.add_argument("--json", help="write results here")
    args = ap.parse_args()

    res = {
        "dp": bench_dp(args.dp_n, args.repeats),
        "mc": bench_mc(args.mc_paths, args.mc_nmax, args.repeats),
        "example1": bench_example1(args.ex1_paths, args.ex1_nmax, args.repeats),
    }
    print(f"{'workload':<10} {'backend':<7} {'first (s)':>10} {'median (s)':>11}")
    for wl, r in res.items():
        for be in ("numba", "numpy"):
            print(f"{wl:<10} {be:<7} {r[be]['first_s']:>10.3f} {r[be]['median_s']:>11.3f}")
        speed = r["numpy"]["median_s"] / max(r["numba"]["median_s"], 1e-12)
        print(f"{wl:<10} speedup {speed:>22.1f}x")
    print(f"dp |P diff| = {res['dp']['max_abs_diff_p_gt_n']:.2e}, "
          f"mc z between backends = {res['mc']['z_between_backends']:.2f}")
    if args.json:
        with open(args.json, "w") as fh:
            json.dump(res, fh, indent=2, sort_keys=True)


if __name__ == "__main__":
    main()
