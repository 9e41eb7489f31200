"""Scenario files: loading, validation, and on-demand artifact generation.

A scenario is a JSON object::

    {
      "name": "srw_first_positive",
      "process": {"variant": "sum", "law": {"kind": "c1"}},
      "stopping": {"kind": "first_positive"},
      "engine": "exact" | "mc" | "both",
      "N": 100000, "arithmetic_mode": "float", "p_list": [2, 3],
      "N_max": 1000, "paths": 100000, "seed": 1, "partitions": 8,
      "checkpoints": [10, 100, 1000],
      "wobble": {"k": [100], "window": 10000, "eps": ["1/2"], "paths": 20000},
      "crossing": {"n": [1, 2, 5], "paths": 100000, "B": "1"},
      "checks": [{"check": "theorem31", "expect": "pass", "params": {}}]
    }

Numbers may be given as decimal or fraction strings so that rational mode
stays lossless.
"""

from __future__ import annotations

import copy
import json
import threading
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

from . import exact as _exact
from . import laws as _laws
from . import montecarlo as _mc
from . import process as _process
from . import stopping as _stopping
from . import verify as _verify

ENGINES = ("exact", "mc", "both")


class ConfigError(ValueError):
    """Malformed or unresolvable configuration."""


def _num(x):
    return float(_laws.parse_number(x))


def _int(x, key):
    try:
        v = int(_laws.parse_number(x, exact=True))
    except (TypeError, ValueError, ZeroDivisionError) as exc:
        raise ConfigError(f"{key} must be an integer") from exc
    return v


@dataclass
class Scenario:
    name: str
    process: dict
    stopping: dict
    engine: str = "exact"
    N: int | None = None
    N_max: int | None = None
    paths: int | None = None
    seed: int = 0
    partitions: int = 8
    checkpoints: list | None = None
    p_list: list = field(default_factory=lambda: [2, 3])
    arithmetic_mode: str = "float"
    prune_eps: float | None = None
    tolerances: dict = field(default_factory=dict)
    wobble: dict | None = None
    crossing: dict | None = None
    checks: list = field(default_factory=list)
    description: str = ""

    @classmethod
    def from_dict(cls, d):
        if not isinstance(d, dict):
            raise ConfigError("scenario must be a JSON object")
        for key in ("name", "process", "stopping"):
            if key not in d:
                raise ConfigError(f"scenario is missing {key!r}")
        known = set(cls.__dataclass_fields__)
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown scenario keys: {sorted(unknown)}")
        s = cls(**copy.deepcopy(d))
        s.validate()
        return s

    def validate(self):
        if self.engine not in ENGINES:
            raise ConfigError(f"engine must be one of {ENGINES}")
        if self.arithmetic_mode not in ("float", "rational"):
            raise ConfigError("arithmetic_mode must be 'float' or 'rational'")
        if self.engine in ("exact", "both") and self.N is None:
            raise ConfigError("exact engine needs N")
        if self.engine in ("mc", "both") and (self.N_max is None or self.paths is None):
            raise ConfigError("mc engine needs N_max and paths")
        for key in ("N", "N_max", "paths", "seed", "partitions"):
            v = getattr(self, key)
            if v is not None:
                setattr(self, key, _int(v, key))
        if self.checkpoints is not None:
            self.checkpoints = [_int(c, "checkpoints") for c in self.checkpoints]
        for c in self.checks:
            if c.get("check") not in _verify.CHECKS:
                raise ConfigError(f"unknown check {c.get('check')!r}")
        try:
            self.build()
        except (_laws.LawError, _process.SpecError, ValueError, KeyError, TypeError) as exc:
            raise ConfigError(f"scenario {self.name!r}: {exc}") from exc

    def build(self, exact=None):
        exact = self.arithmetic_mode == "rational" if exact is None else exact
        law = _laws.law_from_config(self.process.get("law", {}), exact=exact)
        spec = _process.MartingaleSpec(self.process.get("variant", _process.SUM), law)
        rule = _stopping.rule_from_config(self.stopping)
        return spec, rule

    def resolved(self):
        d = {k: copy.deepcopy(getattr(self, k)) for k in self.__dataclass_fields__}
        return d

    def with_overrides(self, seed=None):
        d = self.resolved()
        if seed is not None:
            d["seed"] = seed
        return Scenario.from_dict(d)


# ------------------------------------------------------------------- lookup


def builtin_names():
    root = resources.files("martstop") / "scenarios"
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".json"))


def _read_json(path):
    try:
        with open(path) as fh:
            return json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from exc


def load_scenario(ref, base_dir=None):
    """Scenario from a path, a path relative to ``base_dir``, or a built-in name."""
    if isinstance(ref, dict):
        return Scenario.from_dict(ref)
    for cand in ([Path(base_dir) / ref] if base_dir else []) + [Path(ref)]:
        if cand.is_file():
            return Scenario.from_dict(_read_json(cand))
    name = Path(ref).name
    name = name[:-5] if name.endswith(".json") else name
    if name in builtin_names():
        res = resources.files("martstop") / "scenarios" / f"{name}.json"
        return Scenario.from_dict(json.loads(res.read_text()))
    raise ConfigError(f"unresolvable scenario reference {ref!r}")


def load_suite(ref=None):
    """Suite entries from a path or built-in suite name (default ``default``)."""
    ref = ref or "default"
    base = None
    if Path(ref).is_file():
        data = _read_json(ref)
        base = Path(ref).parent
    else:
        res = resources.files("martstop") / "suites" / f"{Path(ref).name.removesuffix('.json')}.json"
        if not res.is_file():
            raise ConfigError(f"unresolvable suite reference {ref!r}")
        data = json.loads(res.read_text())
    if not isinstance(data, dict) or not isinstance(data.get("entries", []), list):
        raise ConfigError("suite must be an object with an 'entries' list")
    return data, base


# ---------------------------------------------------------------- artifacts


class Runner:
    """Computes and caches traces and reports for scenarios on demand."""

    def __init__(self, workers=1, base_dir=None, backend=None):
        self.workers = workers
        self.base_dir = base_dir
        self.backend = backend
        self._cache = {}
        self._locks = {}
        self._guard = threading.Lock()

    def scenario(self, ref):
        return ref if isinstance(ref, Scenario) else load_scenario(ref, self.base_dir)

    def _memo(self, key, fn):
        with self._guard:
            lock = self._locks.setdefault(key, threading.Lock())
        with lock:
            if key not in self._cache:
                self._cache[key] = fn()
            return self._cache[key]

    def trace(self, sc):
        def make():
            spec, rule = sc.build()
            return _exact.propagate(spec, rule, sc.N, sc.prune_eps, sc.arithmetic_mode,
                                    tuple(_num(p) for p in sc.p_list), self.backend)
        return self._memo((sc.name, "trace", sc.seed), make)

    def is_example1_demo(self, sc):
        spec, rule = sc.build(exact=False)
        if not isinstance(rule, _stopping.Example1) or spec.variant != _process.SUM:
            return False
        b = spec.law
        return isinstance(b, _laws.C1Law) and b.pmf.values == (-1, 1)

    def demo(self, sc):
        def make():
            _, rule = sc.build(exact=False)
            return _mc.example1_demo(rule.L, rule.max_stage or 0, sc.N_max, sc.paths, sc.seed,
                                     sc.checkpoints, rule.first_stage, sc.partitions,
                                     self.workers, self.backend)
        return self._memo((sc.name, "demo", sc.seed), make)

    def mc(self, sc):
        if self.is_example1_demo(sc):
            return self.demo(sc)["report"]

        def make():
            spec, rule = sc.build(exact=False)
            return _mc.estimate(spec, rule, sc.N_max, sc.paths, sc.seed, sc.checkpoints,
                                sc.partitions, self.workers, backend=self.backend)
        return self._memo((sc.name, "mc", sc.seed), make)

    def wobble(self, sc):
        if not sc.wobble:
            return None

        def make():
            spec, _ = sc.build(exact=False)
            w = sc.wobble
            return _mc.wobble_profile(spec, w["k"], _int(w["window"], "window"),
                                      [_num(e) for e in w["eps"]], _int(w["paths"], "paths"),
                                      _int(w.get("seed", sc.seed), "seed"), sc.partitions,
                                      self.workers, self.backend)
        return self._memo((sc.name, "wobble", sc.seed), make)

    def crossing(self, sc):
        if not sc.crossing:
            return None

        def make():
            spec, rule = sc.build(exact=False)
            c = sc.crossing
            B = c.get("B")
            return _mc.overshoot_condition_estimate(
                spec, rule, c["n"], _int(c["paths"], "paths"), _int(c.get("seed", sc.seed), "seed"),
                None if B is None else _num(B), _int(c.get("min_count", 30), "min_count"),
                sc.partitions, self.workers, self.backend)
        return self._memo((sc.name, "crossing", sc.seed), make)

    # -------------------------------------------------------------- checks

    def source(self, sc, entry):
        want = entry.get("source") or ("exact" if sc.engine in ("exact", "both") else "mc")
        return self.trace(sc) if want == "exact" else self.mc(sc)

    def evaluate(self, entry):
        """Run one suite entry (``scenario``, ``check``, ``params``)."""
        sc = self.scenario(entry["scenario"])
        params = {**sc.tolerances, **entry.get("params", {})}
        name = entry["check"]
        fn = _verify.CHECKS[name]
        if name == "theorem31":
            return fn(self.source(sc, entry), **params)
        if name in ("corollary32", "corollary33", "application_constants"):
            return fn(self.trace(sc), **params)
        if name == "theorem33":
            src = self.source(sc, entry)
            crossing = None
            if isinstance(src, _mc.McReport):
                est = self.crossing(sc)
                if est is not None:
                    crossing = {r["n"]: (r["mean"], r["se"]) for r in est["rows"] if r["mean"] is not None}
            params = dict(params)
            params["L_candidate"] = _num(params["L_candidate"])
            return fn(src, crossing=crossing, **params)
        if name == "theorem41":
            spec, rule = sc.build(exact=False)
            reports = {"wobble": self.wobble(sc), "crossing": self.crossing(sc)}
            if sc.engine in ("exact", "both"):
                reports["trace"] = self.trace(sc)
            if sc.engine in ("mc", "both"):
                reports["mc"] = self.mc(sc)
            params = dict(params)
            if "B" in params:
                params["B"] = _num(params["B"])
            return fn(spec, rule, reports, **params)
        if name == "overshoot_law":
            params = dict(params)
            expected = expected_overshoot(params.pop("expected"), self.trace(sc))
            return fn(self.trace(sc), expected, **params)
        if name == "example1_growth":
            return fn(self.demo(sc), **params)
        raise ConfigError(f"no evaluator for check {name!r}")


def expected_overshoot(cfg, trace):
    """Reference overshoot law from a compact description.

    ``{"point": k}`` is a unit atom at ``k``; ``{"geometric": p}`` is
    ``(1 - p) p**(j - 1)`` on ``j = 1, 2, ...`` up to the largest observed atom.
    """
    if "point" in cfg:
        return {int(_laws.parse_number(cfg["point"], exact=True)): 1.0}
    if "geometric" in cfg:
        p = _num(cfg["geometric"])
        top = max((int(k) for k in trace.normalized_overshoot()), default=1)
        return {j: (1 - p) * p ** (j - 1) for j in range(1, top + 1)}
    raise ConfigError(f"unknown expected overshoot law {cfg!r}")
