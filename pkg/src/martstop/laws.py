"""Mean-zero increment laws.

Three families of increments with computable overshoot (``C1``, ``C2(p)``,
``C3(a)``), the two inhomogeneous sequences used as counter-examples to
almost-sure finiteness of first-passage times, and the sampling/compilation
helpers shared by the exact and Monte Carlo engines.

Masses may be ``float`` or :class:`fractions.Fraction`. A law built from
fractions is validated exactly, which lets the exact engine check
conservation identities with zero tolerance.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from numbers import Rational
from typing import Callable, Union

import numpy as np

FLOAT_TOL = 1e-12
C2_TAIL_CUTOFF = 1e-14

Number = Union[int, float, Fraction]


class LawError(ValueError):
    """Raised when a law fails its family constraints."""


def parse_number(text, exact=False):
    """Parse a decimal string (``"0.3"``, ``"1/2"``) or number.

    With ``exact=True`` the result is a :class:`Fraction`, so ``"0.3"`` is
    exactly 3/10 rather than the nearest double.
    """
    if isinstance(text, bool):
        raise LawError(f"not a number: {text!r}")
    if exact:
        if isinstance(text, float):
            return Fraction(text)
        return Fraction(str(text).strip()) if isinstance(text, str) else Fraction(text)
    if isinstance(text, str):
        return float(Fraction(text.strip()))
    return float(text)


def _is_exact(x):
    return isinstance(x, Rational)


def _close_to(x, target, tol=FLOAT_TOL):
    if _is_exact(x) and _is_exact(target):
        return x == target
    return abs(float(x) - float(target)) <= tol


@dataclass(frozen=True)
class DiscreteLaw:
    """Finitely supported law with sorted distinct atoms and positive masses."""

    values: tuple
    masses: tuple

    def __post_init__(self):
        if len(self.values) != len(self.masses) or not self.values:
            raise LawError("a law needs at least one atom and matching masses")
        if any(m <= 0 or m > 1 for m in self.masses):
            raise LawError("every mass must lie in (0, 1]")
        if any(b <= a for a, b in zip(self.values, self.values[1:])):
            raise LawError("atom values must be distinct and sorted ascending")
        if not _close_to(self.total_mass, 1):
            raise LawError(f"masses sum to {self.total_mass}, not 1")
        if not _close_to(self.mean, 0):
            raise LawError(f"law has mean {self.mean}, not 0")

    @classmethod
    def from_atoms(cls, atoms):
        """Build from ``(value, mass)`` pairs; zero masses are dropped and
        duplicate values merged."""
        merged = {}
        for v, m in atoms:
            if m < 0:
                raise LawError("negative mass")
            if m == 0:
                continue
            merged[v] = merged.get(v, 0) + m
        items = sorted(merged.items())
        return cls(tuple(v for v, _ in items), tuple(m for _, m in items))

    @property
    def exact(self):
        return all(_is_exact(m) for m in self.masses) and all(
            _is_exact(v) for v in self.values
        )

    @property
    def total_mass(self):
        return sum(self.masses)

    @property
    def mean(self):
        return sum(v * m for v, m in zip(self.values, self.masses))

    def moment(self, k):
        return sum(v**k * m for v, m in zip(self.values, self.masses))

    @property
    def variance(self):
        return self.moment(2) - self.mean**2

    @property
    def max_value(self):
        return self.values[-1]

    @property
    def min_value(self):
        return self.values[0]

    def atoms(self):
        return list(zip(self.values, self.masses))

    def as_float(self):
        return DiscreteLaw(
            tuple(float(v) for v in self.values), tuple(float(m) for m in self.masses)
        )

    def sample(self, rng, size=None):
        u = rng.random(size)
        cum = np.cumsum([float(m) for m in self.masses])
        idx = np.minimum(np.searchsorted(cum, u, side="right"), len(cum) - 1)
        vals = np.asarray([float(v) for v in self.values])
        out = vals[idx]
        return float(out) if size is None else out


@dataclass(frozen=True)
class LatticePmf(DiscreteLaw):
    """:class:`DiscreteLaw` whose atoms are integers."""

    def __post_init__(self):
        for v in self.values:
            if isinstance(v, float) and not v.is_integer():
                raise LawError(f"lattice atom {v} is not an integer")
            if _is_exact(v) and Fraction(v).denominator != 1:
                raise LawError(f"lattice atom {v} is not an integer")
        object.__setattr__(self, "values", tuple(int(v) for v in self.values))
        super().__post_init__()

    def as_float(self):
        return LatticePmf(self.values, tuple(float(m) for m in self.masses))


def point_mass_zero():
    """The degenerate law ``X = 0``."""
    return LatticePmf((0,), (Fraction(1),))


def simple_random_walk(exact=True):
    half = Fraction(1, 2) if exact else 0.5
    return LatticePmf((-1, 1), (half, half))


# ---------------------------------------------------------------- families


@dataclass(frozen=True)
class C1Law:
    """Integer-valued, mean zero, maximum support point exactly +1."""

    pmf: LatticePmf

    @property
    def exact(self):
        return self.pmf.exact


def make_c1(pmf):
    if not isinstance(pmf, LatticePmf):
        pmf = LatticePmf.from_atoms(pmf)
    if pmf.max_value != 1:
        raise LawError(f"C1 requires maximum support +1, got {pmf.max_value}")
    return C1Law(pmf)


@dataclass(frozen=True)
class C2Law:
    """Geometric upper tail ``P(X = k) = c (1-p) p**k`` for ``k >= 1``.

    The exact engine cannot hold infinitely many atoms, so the upper tail is
    cut after ``truncation_k_max``; the cut mass and its first moment are
    carried as ``tail_mass`` / ``tail_m1`` and charged to the error budget.
    """

    p: Number
    c: Number
    neg_part: tuple  # ((value <= 0, mass), ...)
    truncation_k_max: int
    tail_mass: Number = field(init=False)
    tail_m1: Number = field(init=False)

    def __post_init__(self):
        p, c, k = self.p, self.c, self.truncation_k_max
        object.__setattr__(self, "tail_mass", c * p ** (k + 1))
        object.__setattr__(
            self, "tail_m1", c * (p ** (k + 1) * (k + 1) + p ** (k + 2) / (1 - p))
        )

    @property
    def exact(self):
        return _is_exact(self.p) and _is_exact(self.c)

    def positive_mass(self, k):
        return self.c * (1 - self.p) * self.p**k

    @property
    def positive_total(self):
        return self.c * self.p

    @property
    def positive_mean(self):
        return self.c * self.p / (1 - self.p)

    def truncated_atoms(self):
        """Atoms with the upper tail cut at ``truncation_k_max``.

        Masses sum to ``1 - tail_mass``.
        """
        pos = [(k, self.positive_mass(k)) for k in range(1, self.truncation_k_max + 1)]
        return sorted(list(self.neg_part) + pos)

    def conditional_overshoot_mean(self):
        """Mean of ``X - d`` given ``X > d`` for any ``d >= 0``: 1/(1-p)."""
        return 1 / (1 - self.p)

    def sample(self, rng, size=None):
        # positive side: 1 + Geometric number of extra failures with ratio p
        n = 1 if size is None else size
        p = float(self.p)
        u = rng.random(n)
        pos = rng.geometric(1 - p, n)  # support 1, 2, ...
        neg_vals = np.asarray([float(v) for v, _ in self.neg_part])
        neg_cum = np.cumsum([float(m) for _, m in self.neg_part])
        neg_cum = neg_cum / neg_cum[-1]
        v = rng.random(n)
        neg = neg_vals[np.minimum(np.searchsorted(neg_cum, v, side="right"), len(neg_cum) - 1)]
        out = np.where(u < float(self.positive_total), pos.astype(float), neg)
        return float(out[0]) if size is None else out


def default_c2_kmax(p, c):
    """Smallest ``k`` with ``c * p**(k+1) < 1e-14``."""
    pf, cf = float(p), float(c)
    k = 0
    while cf * pf ** (k + 1) >= C2_TAIL_CUTOFF:
        k += 1
    return k


def make_c2(p, c, neg_part=None, k_max=None):
    """Build a ``C(2, p)`` member.

    Without ``neg_part`` the canonical negative side puts mass ``1 - c p`` on
    the two integers bracketing ``-mu`` with ``mu = cp / ((1-p)(1-cp))``
    (a single atom when ``mu`` is an integer). An explicit ``neg_part`` must
    balance the positive mean ``cp/(1-p)``.
    """
    if not 0 < p < 1:
        raise LawError(f"p must lie in (0, 1), got {p}")
    if not 0 < c < 1 / p:
        raise LawError(f"c must lie in (0, 1/p), got c={c}, p={p}")
    pos_mean = c * p / (1 - p)
    neg_total = 1 - c * p
    if neg_part is None:
        mu = pos_mean / neg_total
        m = math.floor(mu)
        w = m + 1 - mu  # weight on -m
        if not 0 < w <= 1:
            raise LawError("negative-part weights leave (0, 1]")
        if w == 1:
            neg_part = ((-m, neg_total),)
        else:
            neg_part = ((-(m + 1), neg_total * (1 - w)), (-m, neg_total * w))
    else:
        neg_part = tuple(sorted((int(v), mass) for v, mass in neg_part))
        if any(v > 0 for v, _ in neg_part):
            raise LawError("C2 negative part must live on values <= 0")
        if not _close_to(sum(m for _, m in neg_part), neg_total):
            raise LawError("C2 negative part must carry mass 1 - c p")
        if not _close_to(sum(v * m for v, m in neg_part) + pos_mean, 0):
            raise LawError("C2 negative part does not balance the positive mean")
    neg_part = tuple((v, m) for v, m in neg_part if m > 0)
    if k_max is None:
        k_max = default_c2_kmax(p, c)
    return C2Law(p, c, neg_part, int(k_max))


@dataclass(frozen=True)
class C3Law:
    """``P(X > y) = c exp(-a y)`` for ``y > 0``, one negative atom at ``-b``."""

    a: float
    c: float
    b: float

    exact = False

    def survival(self, y):
        return self.c * math.exp(-self.a * y) if y > 0 else None

    @property
    def mean(self):
        return self.c / self.a - (1 - self.c) * self.b

    def sample(self, rng, size=None):
        n = 1 if size is None else size
        u = rng.random(n)
        e = -np.log1p(-rng.random(n)) / self.a
        out = np.where(u < self.c, e, -self.b)
        return float(out[0]) if size is None else out


def make_c3(a, c):
    a, c = float(a), float(c)
    if not a > 0:
        raise LawError(f"a must be positive, got {a}")
    if not 0 < c < 1:
        raise LawError(f"c must lie in (0, 1), got {c}")
    return C3Law(a, c, c / (a * (1 - c)))


# ------------------------------------------------------- indexed sequences


@dataclass(frozen=True)
class IndexedLawSequence:
    """Independent, non-identically distributed increments ``X_1, X_2, ...``."""

    name: str
    generator: Callable[[int], DiscreteLaw]
    lattice: bool = True
    exact: bool = False

    def law(self, j):
        if j < 1:
            raise ValueError("increments are indexed from 1")
        return self.generator(j)

    __call__ = law


def _ce1_law(j, exact):
    q = Fraction(1, j * j) if exact else 1.0 / (j * j)
    return LatticePmf.from_atoms([(-1, q / 2), (0, 1 - q), (1, q / 2)])


def ce1_sequence(exact=False):
    """``P(X_j = 0) = 1 - j**-2``, ``P(X_j = +-1) = j**-2 / 2``."""
    return IndexedLawSequence(
        "ce1", lambda j: _ce1_law(j, exact), lattice=True, exact=exact
    )


def _ce2_law(j, exact):
    if exact:
        q = Fraction(1, 2**j)
        return DiscreteLaw.from_atoms([(Fraction(-1, j), 1 - q), (Fraction(2**j - 1, j), q)])
    if j >= 1000:
        # jump probability is below double resolution; the float law would
        # silently lose its mean-zero balance
        raise LawError(f"CE2 law at j={j} is not representable in double precision")
    q = math.ldexp(1.0, -j)
    return DiscreteLaw.from_atoms([(-1.0 / j, 1.0 - q), ((2.0**j - 1.0) / j, q)])


def ce2_sequence(exact=False):
    """``P(X_j = (2**j - 1)/j) = 2**-j``, ``P(X_j = -1/j) = 1 - 2**-j``."""
    return IndexedLawSequence(
        "ce2", lambda j: _ce2_law(j, exact), lattice=False, exact=exact
    )


def ce2_no_jump_probability(terms=50):
    """``prod_{j<=terms} (1 - 2**-j)``, evaluated exactly then rounded."""
    prod = Fraction(1)
    for j in range(1, terms + 1):
        prod *= 1 - Fraction(1, 2**j)
    return float(prod)


# ---------------------------------------------------------------- helpers

IncrementLaw = Union[DiscreteLaw, C1Law, C2Law, C3Law]


def base_law(law):
    """Unwrap family containers to something with ``values``/``masses``."""
    if isinstance(law, C1Law):
        return law.pmf
    return law


def law_mean(law):
    law = base_law(law)
    if isinstance(law, C2Law):
        neg = sum(v * m for v, m in law.neg_part)
        return neg + law.positive_mean
    return law.mean


def law_variance(law):
    law = base_law(law)
    if isinstance(law, C2Law):
        p, c = law.p, law.c
        # sum k^2 (1-p) p^k = p (1+p) / (1-p)^2
        pos2 = c * p * (1 + p) / (1 - p) ** 2
        return pos2 + sum(v * v * m for v, m in law.neg_part) - law_mean(law) ** 2
    if isinstance(law, C3Law):
        return law.c * 2 / law.a**2 + (1 - law.c) * law.b**2
    return law.variance


def is_lattice(law):
    if isinstance(law, IndexedLawSequence):
        return law.lattice
    law = base_law(law)
    if isinstance(law, C2Law):
        return True
    if isinstance(law, C3Law):
        return False
    return isinstance(law, LatticePmf)


def sample(law, rng):
    """One draw from ``law`` using generator ``rng``."""
    return base_law(law).sample(rng)


def lattice_step(law, exact=False):
    """Return ``(values, masses, tail_mass, tail_m1)`` for the exact engine."""
    law = base_law(law)
    conv = (lambda m: m) if exact else float
    if isinstance(law, C2Law):
        atoms = law.truncated_atoms()
        return (
            [int(v) for v, _ in atoms],
            [conv(m) for _, m in atoms],
            conv(law.tail_mass),
            conv(law.tail_m1),
        )
    if isinstance(law, LatticePmf):
        return list(law.values), [conv(m) for m in law.masses], conv(0), conv(0)
    raise LawError(f"{type(law).__name__} is not a lattice law")


def max_jump(law):
    law = base_law(law)
    if isinstance(law, C2Law):
        return law.truncation_k_max
    return law.max_value


def describe(law):
    if isinstance(law, IndexedLawSequence):
        return {"kind": law.name}
    if isinstance(law, C1Law):
        return {"kind": "c1", "atoms": [[str(v), str(m)] for v, m in law.pmf.atoms()]}
    if isinstance(law, C2Law):
        return {"kind": "c2", "p": str(law.p), "c": str(law.c), "k_max": law.truncation_k_max}
    if isinstance(law, C3Law):
        return {"kind": "c3", "a": repr(law.a), "c": repr(law.c)}
    return {"kind": "explicit", "atoms": [[str(v), str(m)] for v, m in law.atoms()]}


def law_from_config(cfg, exact=False):
    """Build a law from a scenario ``law`` block.

    ``kind`` is one of ``c1``, ``c2``, ``c3``, ``ce1``, ``ce2``, ``explicit``.
    """
    kind = cfg.get("kind")
    num = lambda x: parse_number(x, exact)  # noqa: E731
    if kind == "c1":
        atoms = cfg.get("atoms", [["1", "1/2"], ["-1", "1/2"]])
        return make_c1(LatticePmf.from_atoms([(int(Fraction(str(v))), num(m)) for v, m in atoms]))
    if kind == "c2":
        neg = cfg.get("neg_part")
        if neg is not None:
            neg = [(int(Fraction(str(v))), num(m)) for v, m in neg]
        return make_c2(num(cfg["p"]), num(cfg["c"]), neg, cfg.get("k_max"))
    if kind == "c3":
        return make_c3(parse_number(cfg["a"]), parse_number(cfg["c"]))
    if kind == "ce1":
        return ce1_sequence(exact)
    if kind == "ce2":
        return ce2_sequence(exact)
    if kind == "explicit":
        atoms = [(Fraction(str(v)), num(m)) for v, m in cfg["atoms"]]
        if all(v.denominator == 1 for v, _ in atoms):
            return LatticePmf.from_atoms([(int(v), m) for v, m in atoms])
        vals = [(v if exact else float(v), m) for v, m in atoms]
        return DiscreteLaw.from_atoms(vals)
    raise LawError(f"unknown law kind {kind!r}")


def compile_for_mc(law, n_steps):
    """Tables for the Monte Carlo kernels.

    Returns ``(kind, values, cum, c3_params)`` where ``kind`` is 0 for a
    discrete table (``values``/``cum`` shaped ``(S, A)`` with ``S == 1`` for a
    homogeneous law, ``S == n_steps`` for an indexed one) and 1 for ``C3``.
    """
    if isinstance(law, C3Law):
        return 1, np.zeros((1, 1)), np.ones((1, 1)), np.array([law.a, law.c, law.b])
    if isinstance(law, IndexedLawSequence):
        laws = [law.law(j).as_float() for j in range(1, n_steps + 1)]
    else:
        b = base_law(law)
        if isinstance(b, C2Law):
            vals, masses, tail, _ = lattice_step(b)
            # sampling table keeps the whole truncated range; the cut tail is
            # below 1e-14 and is folded into the top atom
            masses = list(masses)
            masses[-1] += tail
            laws = [DiscreteLaw(tuple(float(v) for v in vals), tuple(masses))]
        else:
            laws = [b.as_float()]
    width = max(len(x.values) for x in laws)
    values = np.zeros((len(laws), width))
    cum = np.ones((len(laws), width))
    for s, x in enumerate(laws):
        k = len(x.values)
        values[s, :k] = x.values
        values[s, k:] = x.values[-1]
        cum[s, :k] = np.cumsum(x.masses)
        cum[s, k - 1 :] = 2.0  # guards against rounding at the top
    return 0, values, cum, np.zeros(3)
