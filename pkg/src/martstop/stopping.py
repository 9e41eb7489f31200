"""Adapted, possibly extended-valued stopping rules.

All rules use the ``T >= 1`` convention: the decision is first taken after
the first increment. A rule that never fires leaves ``T = infinity``; engines
that simulate to a finite horizon report such paths as censored.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

STOPPED = "stopped"
RUNNING = "running"
CENSORED = "censored_at_horizon"


@dataclass(frozen=True)
class FirstAbove:
    """First ``n > 0`` with ``M_n > h``."""

    h: int = 0

    def __post_init__(self):
        if self.h < 0:
            raise ValueError("level h must be nonnegative")

    def stops(self, M):
        return M > self.h

    def describe(self):
        return {"kind": "first_above", "h": self.h}


def FirstPositive():
    return FirstAbove(0)


@dataclass(frozen=True)
class FirstExit:
    """First ``n > 0`` with ``M_n > 0`` or ``M_n < -z`` (strict on both sides)."""

    z: float

    def __post_init__(self):
        if not self.z > 0:
            raise ValueError("z must be positive")

    def stops(self, M):
        return M > 0 or M < -self.z

    def describe(self):
        return {"kind": "first_exit", "z": self.z}


@dataclass(frozen=True)
class Example1:
    """Randomized stop at the return times of growing excursions.

    Stage ``k`` waits for ``|M_n| > k**3`` and then for ``|M_n| < L``; at
    that return time, for ``k >= first_stage``, an independent coin with
    success probability ``k**-2`` decides whether to stop. Stages beyond
    ``max_stage`` (if set) are never entered, so ``T = infinity``.
    """

    L: float
    first_stage: int = 2
    max_stage: int | None = None

    def __post_init__(self):
        if not self.L > 0:
            raise ValueError("L must be positive")

    def describe(self):
        return {
            "kind": "example1",
            "L": self.L,
            "first_stage": self.first_stage,
            "max_stage": self.max_stage,
        }


@dataclass(frozen=True)
class StopOutcome:
    status: str
    n: int
    value: float

    @property
    def stopped(self):
        return self.status == STOPPED


class Example1Tracker:
    """Stage machine for :class:`Example1`; one instance per path."""

    def __init__(self, rule, aux_rng):
        self.rule = rule
        self.aux = aux_rng
        self.stage = 1
        self.waiting_return = False
        self.dead = False
        self.coins = []  # (stage, accepted)

    def update(self, M):
        r = self.rule
        if self.dead:
            return False
        if not self.waiting_return:
            if abs(M) > self.stage**3:
                self.waiting_return = True
            return False
        if abs(M) < r.L:
            k = self.stage
            if k >= r.first_stage:
                accepted = self.aux.random() < 1.0 / (k * k)
                self.coins.append((k, accepted))
                if accepted:
                    return True
            self.stage += 1
            self.waiting_return = False
            if r.max_stage is not None and self.stage > r.max_stage:
                self.dead = True
        return False


def evaluate(rule, path_prefix, aux_rng=None):
    """First index in ``path_prefix`` (``M_1, M_2, ...``) at which ``rule`` fires."""
    tracker = Example1Tracker(rule, aux_rng) if isinstance(rule, Example1) else None
    for i, M in enumerate(path_prefix, start=1):
        fire = tracker.update(M) if tracker else rule.stops(M)
        if fire:
            return StopOutcome(STOPPED, i, M)
    n = len(path_prefix)
    last = path_prefix[-1] if n else 0
    return StopOutcome(RUNNING, n, last)


def overshoot(outcome, h):
    if not outcome.stopped:
        raise ValueError("overshoot is only defined for stopped outcomes")
    return outcome.value - h


def rule_from_config(cfg):
    kind = cfg.get("kind")
    if kind in ("first_above", "first_positive"):
        return FirstAbove(int(cfg.get("h", 0)))
    if kind == "first_exit":
        return FirstExit(float(cfg["z"]))
    if kind == "example1":
        ms = cfg.get("max_stage")
        return Example1(
            float(cfg.get("L", 1)), int(cfg.get("first_stage", 2)), None if ms is None else int(ms)
        )
    raise ValueError(f"unknown stopping rule {kind!r}")


def acceptance_probability(k):
    return 1.0 / (k * k)


def never_accept_probability(first_stage, last_stage):
    """Probability that no coin succeeds over stages ``first..last``."""
    return math.prod(1 - acceptance_probability(k) for k in range(first_stage, last_stage + 1))
