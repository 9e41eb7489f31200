"""Command-line front end: ``martstop {exact,mc,verify,list-scenarios}``.

Exit codes: 0 ok, 1 check failure, 2 capability mismatch, 3 config error.
The only environment variable consulted is ``MARTSTOP_OUT_DIR``, which
overrides the default output directory.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import platform
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from . import exact as _exact
from . import scenario as _scenario
from . import verify as _verify
from .scenario import ConfigError, Runner

EXIT_OK, EXIT_CHECK, EXIT_CAPABILITY, EXIT_CONFIG = 0, 1, 2, 3
OUT_ENV = "MARTSTOP_OUT_DIR"


def _out_dir(arg):
    d = Path(arg or os.environ.get(OUT_ENV) or "martstop-out")
    d.mkdir(parents=True, exist_ok=True)
    return d


def _versions():
    import numba

    return {"martstop": __version__, "numpy": np.__version__, "numba": numba.__version__,
            "python": platform.python_version()}


def _write_json(path, obj):
    with open(path, "w") as fh:
        json.dump(_verify._jsonable(obj), fh, sort_keys=True, indent=2)
        fh.write("\n")


def _write_csv(path, header_obj, rows):
    """CSV with a single leading ``#`` line holding the resolved config."""
    with open(path, "w", newline="") as fh:
        fh.write("# " + json.dumps(_verify._jsonable(header_obj), sort_keys=True) + "\n")
        csv.writer(fh, lineterminator="\n").writerows(rows)


def _load(args):
    sc = _scenario.load_scenario(args.config)
    return sc.with_overrides(seed=args.seed)


# --------------------------------------------------------------------- exact


def cmd_exact(args):
    sc = _load(args)
    out = _out_dir(args.out)
    runner = Runner(workers=args.workers)
    t0 = time.perf_counter()
    trace = runner.trace(sc)
    runtime = time.perf_counter() - t0
    cfg = {"config": sc.resolved(), "seed": sc.seed}
    _write_csv(out / f"{sc.name}.trace.csv", cfg, trace.rows())
    res = _exact.conservation_residual(trace)
    meta = {
        **cfg,
        "engine": "exact",
        "versions": _versions(),
        "runtime_s": runtime,
        "trace_meta": {k: v for k, v in trace.meta.items() if k != "runtime_s"},
        "summary": {
            "N": trace.N,
            "p_gt_N": float(trace.p_gt_n[-1]),
            "L_N": float(trace.L[-1]),
            "R_N": float(trace.R[-1]),
            "max_abs_residual": float(res["max_abs"]),
            "max_excess_over_budget": float(res["max_excess"]),
            "overshoot_mean": trace.overshoot_mean(),
        },
    }
    law = sc.process.get("law", {}).get("kind")
    if law == "ce1":
        meta["infinity_lower_bound"] = _exact.ce1_infinity_lower_bound(trace.N, trace)
    _write_json(out / f"{sc.name}.exact.meta.json", meta)
    if args.emit_plots:
        _plot_exact(out / f"{sc.name}.exact.svg", trace, sc.name)
    print(f"{sc.name}: N={trace.N} P(T>N)={float(trace.p_gt_n[-1]):.6g} "
          f"L_N={float(trace.L[-1]):.6g} residual={float(res['max_abs']):.3g} -> {out}")
    return EXIT_OK


# ------------------------------------------------------------------------ mc


def _mc_comparison(report, trace):
    rows = []
    for n in report.checkpoints:
        if n > trace.N:
            continue
        row = {"n": n}
        for name, arr in (("p_gt_n", trace.p_gt_n), ("L_n", trace.L), ("R_n", trace.R)):
            m = report.estimate(name, n)
            ref = float(arr[n])
            row[name] = {"exact": ref, "mc": m.mean, "se": m.se,
                         "z": (m.mean - ref) / m.se if m.se > 0 else 0.0}
        rows.append(row)
    return rows


def cmd_mc(args):
    sc = _load(args)
    out = _out_dir(args.out)
    runner = Runner(workers=args.workers)
    cfg = {"config": sc.resolved(), "seed": sc.seed}
    t0 = time.perf_counter()
    extra = dict(cfg)
    if runner.is_example1_demo(sc):
        demo = runner.demo(sc)
        report = demo["report"]
        extra["example1"] = {k: v for k, v in demo.items() if k != "report"}
        _write_csv(out / f"{sc.name}.growth.csv", cfg,
                   [["n", "mean_abs_stopped", "se", "strictly_increasing"]]
                   + [[g["n"], repr(g["mean"]), repr(g["se"]), demo["strictly_increasing"]]
                      for g in demo["growth_curve"]])
    else:
        report = runner.mc(sc)
    if sc.engine == "both":
        extra["exact_comparison"] = _mc_comparison(report, runner.trace(sc))
    runtime = time.perf_counter() - t0
    text = report.to_json(extra=_verify._jsonable(extra))
    (out / f"{sc.name}.mc.json").write_text(text + "\n")
    lines = report.to_csv().splitlines()
    _write_csv(out / f"{sc.name}.mc.csv", cfg, [ln.split(",") for ln in lines])
    _write_json(out / f"{sc.name}.mc.meta.json",
                {**cfg, "engine": "mc", "versions": _versions(), "runtime_s": runtime,
                 "workers": args.workers})
    if args.emit_plots:
        _plot_mc(out / f"{sc.name}.mc.svg", report, sc.name)
    o = report.overshoot
    print(f"{sc.name}: paths={report.paths} censored={report.censored} "
          f"P(T>N)={report.estimate('p_gt_n').mean:.6g} overshoot_mean={o.mean:.6g} -> {out}")
    return EXIT_OK


# -------------------------------------------------------------------- verify


def cmd_verify(args):
    if args.list:
        for name in _verify.CHECKS:
            print(name)
        return EXIT_OK
    data, base = _scenario.load_suite(args.config)
    entries = data.get("entries", [])
    if args.seed is not None:
        entries = [dict(e, seed=args.seed) for e in entries]
    runner = Runner(workers=args.workers, base_dir=base)
    scenarios = {}

    def resolve(e):
        key = (e["scenario"], e.get("seed"))
        if key not in scenarios:
            sc = runner.scenario(e["scenario"])
            scenarios[key] = sc.with_overrides(seed=e.get("seed")) if e.get("seed") is not None else sc
        return dict(e, scenario=scenarios[key])

    resolved = [resolve(e) for e in entries]
    t0 = time.perf_counter()
    outcome = _verify.run_suite(resolved, runner.evaluate)
    runtime = time.perf_counter() - t0
    out = _out_dir(args.out)
    result = outcome.to_dict()
    result["suite"] = data.get("name", str(args.config))
    result["config"] = {"entries": entries, "seed": args.seed}
    _write_json(out / f"verify-{result['suite']}.json", result)
    _write_json(out / f"verify-{result['suite']}.meta.json",
                {"versions": _versions(), "runtime_s": runtime, "workers": args.workers})
    print(outcome.table())
    print("FAILED" if outcome.failed else "OK")
    return EXIT_CHECK if outcome.failed else EXIT_OK


def cmd_list(args):
    for name in _scenario.builtin_names():
        sc = _scenario.load_scenario(name)
        print(f"{name:<24} {sc.engine:<6} {sc.description}")
    return EXIT_OK


# --------------------------------------------------------------------- plots


def _pyplot():
    try:
        import matplotlib

        matplotlib.use("svg")
        import matplotlib.pyplot as plt
    except ImportError as exc:
        raise ConfigError("--emit-plots needs matplotlib (pip install martstop[plots])") from exc
    return plt


def _plot_exact(path, trace, title):
    plt = _pyplot()
    n = np.arange(1, trace.N + 1)
    P = np.asarray(trace.p_gt_n[1:], dtype=float)
    fig, ax = plt.subplots(2, 2, figsize=(9, 6))
    ax[0, 0].loglog(n, P)
    ax[0, 0].set_title("P(T > n)")
    ax[0, 1].semilogx(n, np.asarray(trace.L[1:], dtype=float))
    ax[0, 1].set_title("L_n")
    ax[1, 0].semilogx(n, np.asarray(trace.R[1:], dtype=float))
    ax[1, 0].set_title("R_n")
    ax[1, 1].semilogx(n, P * np.asarray(trace.m2[1:], dtype=float))
    ax[1, 1].set_title("P(T > n) E[M_n^2; T > n]")
    fig.suptitle(title)
    fig.tight_layout()
    fig.savefig(path, metadata={"Date": None})
    plt.close(fig)


def _plot_mc(path, report, title):
    plt = _pyplot()
    n = np.asarray(report.checkpoints)
    fig, ax = plt.subplots(1, 3, figsize=(11, 3.5))
    for a, name in zip(ax, ("p_gt_n", "L_n", "R_n")):
        s = report.series(name)
        m = np.array([x.mean for x in s])
        e = np.array([x.se for x in s])
        a.errorbar(n, m, yerr=_verify.MC_SIGMAS / 2 * e, fmt="o-", ms=3)
        a.set_xscale("log")
        a.set_title(name)
    fig.suptitle(title)
    fig.tight_layout()
    fig.savefig(path, metadata={"Date": None})
    plt.close(fig)


# ---------------------------------------------------------------------- main


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="scenario (or suite) path or built-in name")
    common.add_argument("--out", help=f"output directory (default ${OUT_ENV} or ./martstop-out)")
    common.add_argument("--workers", type=int, default=1, help="worker threads")
    common.add_argument("--seed", type=int, default=None, help="override the scenario seed")
    common.add_argument("--emit-plots", action="store_true", help="also write SVG figures")

    p = argparse.ArgumentParser(prog="martstop", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("exact", parents=[common], help="exact DP trace").set_defaults(func=cmd_exact)
    sub.add_parser("mc", parents=[common], help="Monte Carlo report").set_defaults(func=cmd_mc)
    v = sub.add_parser("verify", parents=[common], help="run a check suite (default: the built-in suite)")
    v.add_argument("--list", action="store_true", help="list check names and exit")
    v.set_defaults(func=cmd_verify)
    sub.add_parser("list-scenarios", help="list built-in scenarios").set_defaults(func=cmd_list)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    if args.command in ("exact", "mc") and not args.config:
        print("error: --config is required", file=sys.stderr)
        return EXIT_CONFIG
    if getattr(args, "workers", 1) < 1:
        print("error: --workers must be positive", file=sys.stderr)
        return EXIT_CONFIG
    try:
        return args.func(args)
    except _exact.CapabilityError as exc:
        print(f"capability mismatch: {exc}", file=sys.stderr)
        return EXIT_CAPABILITY
    except (ValueError, KeyError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
