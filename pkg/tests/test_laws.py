from fractions import Fraction as F

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from martstop import laws


def two_point_mixture(a1, b1, a2, b2, w):
    """Mean-zero law mixing two mean-zero two-point laws on ``a < 0 < b``."""
    atoms = []
    for a, b, wt in ((a1, b1, w), (a2, b2, 1 - w)):
        atoms += [(a, wt * F(b, b - a)), (b, wt * F(-a, b - a))]
    return laws.LatticePmf.from_atoms(atoms)


mixtures = st.builds(
    two_point_mixture,
    st.integers(-4, -1), st.integers(1, 4), st.integers(-4, -1), st.integers(1, 4),
    st.fractions(min_value=0, max_value=1, max_denominator=5),
)


@given(mixtures)
def test_mixtures_are_valid_mean_zero_laws(law):
    assert law.total_mass == 1
    assert law.mean == 0
    assert len(law.values) <= 4


@given(st.integers(1, 5), st.integers(1, 5), st.fractions(F(1, 10), F(9, 10), max_denominator=10))
def test_nonzero_mean_is_rejected(a, b, m):
    # mass m at b and 1-m at -a has mean zero only when m*b == (1-m)*a
    if m * b == (1 - m) * a:
        return
    with pytest.raises(laws.LawError):
        laws.LatticePmf.from_atoms([(-a, 1 - m), (b, m)])


def test_masses_must_sum_to_one():
    with pytest.raises(laws.LawError):
        laws.LatticePmf.from_atoms([(-1, F(1, 2)), (1, F(1, 3))])


def test_lattice_rejects_fractional_atoms():
    with pytest.raises(laws.LawError):
        laws.LatticePmf((F(-1, 2), F(1, 2)), (F(1, 2), F(1, 2)))


def test_parse_number():
    assert laws.parse_number("3/10", exact=True) == F(3, 10)
    assert laws.parse_number("0.3", exact=True) == F(3, 10)
    assert laws.parse_number("0.25") == 0.25


def test_srw_and_degenerate():
    srw = laws.simple_random_walk()
    assert srw.values == (-1, 1) and srw.masses == (F(1, 2), F(1, 2))
    assert srw.variance == 1
    assert laws.point_mass_zero().variance == 0


def test_c1_requires_top_atom_one():
    laws.make_c1(laws.LatticePmf.from_atoms([(1, F(2, 3)), (-2, F(1, 3))]))
    with pytest.raises(laws.LawError):
        laws.make_c1(laws.LatticePmf.from_atoms([(2, F(1, 3)), (-1, F(2, 3))]))


@pytest.mark.parametrize("p,c", [(F(3, 10), F(1)), (F(1, 2), F(1)), (F(1, 2), F(1, 2)), (F(1, 5), F(3, 4))])
def test_c2_exact_law_has_mean_zero(p, c):
    law = laws.make_c2(p, c)
    atoms = law.truncated_atoms()
    total = sum(m for _, m in atoms) + law.tail_mass
    mean = sum(v * m for v, m in atoms) + law.tail_m1
    assert total == 1
    assert mean == 0
    assert all(v <= 0 for v, _ in law.neg_part)
    # negative part sits on at most two adjacent integers
    vals = [v for v, _ in law.neg_part]
    assert len(vals) <= 2 and (len(vals) < 2 or vals[1] - vals[0] == 1)


@pytest.mark.parametrize("p,c", [(0.3, 1.0), (0.5, 1.0), (0.9, 0.5)])
def test_c2_tail_formulas_against_direct_sums(p, c):
    law = laws.make_c2(p, c)
    K = law.truncation_k_max
    ks = np.arange(K + 1, K + 4000, dtype=float)
    pm = c * (1 - p) * p**ks
    assert law.tail_mass == pytest.approx(pm.sum(), rel=1e-9, abs=1e-30)
    assert law.tail_m1 == pytest.approx((ks * pm).sum(), rel=1e-9, abs=1e-30)
    assert c * p ** (K + 1) < 1e-14 <= c * p**K


def test_c2_known_negative_parts():
    assert laws.make_c2(F(1, 2), F(1)).neg_part == ((-2, F(1, 2)),)
    neg = dict(laws.make_c2(F(3, 10), F(1)).neg_part)
    assert set(neg) == {-1, 0}
    assert sum(neg.values()) == F(7, 10)


def test_c2_sampler_matches_law():
    law = laws.make_c2(0.3, 1.0)
    x = law.sample(np.random.default_rng(0), 200_000)
    assert abs(x.mean()) < 4 * x.std() / np.sqrt(x.size)
    assert np.mean(x == 1) == pytest.approx(0.7 * 0.3, abs=4e-3)


@pytest.mark.parametrize("a,c", [(1.0, 0.5), (2.0, 0.5), (0.5, 0.2)])
def test_c3_mean_zero_and_sampler(a, c):
    law = laws.make_c3(a, c)
    assert c / a - (1 - c) * law.b == pytest.approx(0, abs=1e-15)
    x = law.sample(np.random.default_rng(1), 400_000)
    assert abs(x.mean()) < 4 * x.std() / np.sqrt(x.size)
    assert float(laws.law_variance(law)) == pytest.approx(x.var(), rel=0.02)


def test_ce1_laws():
    seq = laws.ce1_sequence(exact=True)
    for j in range(1, 20):
        law = seq.law(j)
        assert law.mean == 0 and law.total_mass == 1
        assert dict(law.atoms()).get(1) == F(1, 2 * j * j)


def test_ce2_laws_exact():
    seq = laws.ce2_sequence(exact=True)
    for j in range(1, 40):
        law = seq.law(j)
        assert law.mean == 0 and law.total_mass == 1
        assert law.max_value == F(2**j - 1, j)
        assert law.min_value == F(-1, j)


def test_ce2_float_refuses_overflowing_index():
    with pytest.raises(laws.LawError):
        laws.ce2_sequence().law(1000)


def test_ce2_no_jump_probability():
    q = laws.ce2_no_jump_probability(50)
    direct = np.prod([1 - 2.0**-j for j in range(1, 51)])
    assert float(q) == pytest.approx(direct, rel=1e-13)
    # partial product to 50 is within 2**-50 of the infinite product
    assert abs(float(q) - float(laws.ce2_no_jump_probability(200))) < 1e-12
    assert round(float(q), 4) == 0.2888


def test_law_from_config_kinds():
    assert laws.describe(laws.law_from_config({"kind": "c1"}))["kind"] == "c1"
    law = laws.law_from_config({"kind": "c2", "p": "3/10", "c": "1"}, exact=True)
    assert law.p == F(3, 10)
    assert laws.law_from_config({"kind": "c3", "a": "2", "c": "1/2"}).a == 2.0
    assert laws.law_from_config({"kind": "explicit", "atoms": [["0", "1"]]}).values == (0,)
    with pytest.raises(laws.LawError):
        laws.law_from_config({"kind": "nope"})


@settings(max_examples=30)
@given(mixtures, st.integers(1, 30))
def test_compile_for_mc_tables(law, n):
    kind, vals, cum, _ = laws.compile_for_mc(law, n)
    assert kind == 0 and vals.shape == cum.shape
    k = len(law.values)
    assert np.all(np.diff(cum[0, :k]) > 0)
    assert cum[0, k - 1] == 2.0
    np.testing.assert_allclose(cum[0, : k - 1], np.cumsum([float(m) for m in law.masses])[: k - 1])

