from fractions import Fraction as F

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from martstop import exact, laws, process, stopping
from oracles import enumerate_paths, gamblers_ruin_top, srw_survival
from test_laws import mixtures


def test_rational_srw_first_steps(srw_spec_exact, first_positive):
    t = exact.propagate(srw_spec_exact, first_positive, 3, arithmetic_mode="rational")
    assert list(t.p_gt_n) == [1, F(1, 2), F(1, 2), F(3, 8)]
    assert t.L[3] == F(5, 8) and t.R[3] == -F(5, 8)


def test_rational_srw_matches_ballot_counts(srw_spec_exact, first_positive):
    t = exact.propagate(srw_spec_exact, first_positive, 40, arithmetic_mode="rational")
    for n in range(41):
        assert t.p_gt_n[n] == srw_survival(n)
    assert all(t.L[n] + t.R[n] == 0 for n in range(41))


@settings(max_examples=15, deadline=None)
@given(mixtures, st.integers(0, 2), st.integers(1, 6))
def test_rational_dp_equals_enumeration(law, h, N):
    spec = process.MartingaleSpec(process.SUM, law)
    t = exact.propagate(spec, stopping.FirstAbove(h), N, arithmetic_mode="rational")
    ref = enumerate_paths(law, N, h)
    assert list(t.p_gt_n) == ref["P"]
    assert list(t.L) == ref["L"]
    assert list(t.R) == ref["R"]
    assert list(t.m2) == ref["m2"]


def test_square_minus_n_against_enumeration(srw_spec_exact):
    spec = process.MartingaleSpec(process.POLY2_VARIANCE, srw_spec_exact.law)
    N = 12
    t = exact.propagate(spec, stopping.FirstPositive(), N, arithmetic_mode="rational")
    ref = enumerate_paths(laws.simple_random_walk(), N, 0, transform="square_minus_n")
    assert list(t.p_gt_n) == ref["P"]
    assert list(t.L) == ref["L"]
    assert list(t.R) == ref["R"]
    ft = exact.propagate(spec, stopping.FirstPositive(), N)
    np.testing.assert_allclose(ft.L, [float(x) for x in ref["L"]], atol=1e-14)


@settings(max_examples=10, deadline=None)
@given(mixtures, st.integers(5, 60))
def test_float_matches_rational(law, N):
    spec = process.MartingaleSpec(process.SUM, law)
    r = exact.propagate(spec, stopping.FirstPositive(), N, arithmetic_mode="rational")
    f = exact.propagate(spec, stopping.FirstPositive(), N, prune_eps=0.0)
    for a, b in ((r.p_gt_n, f.p_gt_n), (r.L, f.L), (r.R, f.R), (r.m2, f.m2)):
        np.testing.assert_allclose([float(x) for x in a], b, rtol=1e-11, atol=1e-13)


@pytest.mark.parametrize("rule", [stopping.FirstPositive(), stopping.FirstAbove(3), stopping.FirstExit(4)])
def test_backends_agree(srw_spec, rule):
    a = exact.propagate(srw_spec, rule, 3000, backend="numba")
    b = exact.propagate(srw_spec, rule, 3000, backend="numpy")
    for name in ("p_gt_n", "L", "R", "m2", "m3", "err_m1"):
        np.testing.assert_allclose(getattr(a, name), getattr(b, name), rtol=1e-10, atol=1e-15)


@pytest.mark.parametrize("eps", [0.0, 1e-15, 1e-9, 1e-6])
def test_conservation_within_budget(srw_spec, first_positive, eps):
    t = exact.propagate(srw_spec, first_positive, 5000, prune_eps=eps)
    res = exact.conservation_residual(t)
    assert res["max_excess"] <= 1e-12
    assert np.all(np.diff(t.err_m1) >= 0)
    if eps == 0.0:
        assert t.err_m1[-1] == 0


def test_survival_is_monotone(srw_spec, first_positive):
    t = exact.propagate(srw_spec, first_positive, 2000)
    # flat steps of the survival curve may wobble by summation rounding only
    assert np.all(np.diff(t.p_gt_n) <= 1e-15)
    # alive + stopped + pruned mass is conserved
    np.testing.assert_allclose(t.stopped_total() + t.p_gt_n + t.err_mass, 1, atol=1e-12)


@pytest.mark.parametrize("z", [1, 3, 6])
def test_first_exit_gamblers_ruin(srw_spec_exact, z):
    t = exact.propagate(srw_spec_exact, stopping.FirstExit(z), 400)
    top = t.stopped_hist.get(1, 0.0)
    assert top == pytest.approx(float(gamblers_ruin_top(z)), abs=1e-12)
    assert t.L[-1] == pytest.approx(0, abs=1e-12)


def test_c1_overshoot_is_exactly_one():
    law = laws.make_c1(laws.LatticePmf.from_atoms([(1, F(2, 3)), (-2, F(1, 3))]))
    spec = process.MartingaleSpec(process.SUM, law)
    t = exact.propagate(spec, stopping.FirstAbove(3), 60, arithmetic_mode="rational")
    assert set(t.overshoot_hist()) == {1}
    assert t.L[-1] == 4 * (1 - t.p_gt_n[-1])


def test_c2_truncation_budget():
    spec = process.MartingaleSpec(process.SUM, laws.make_c2(0.5, 1.0))
    t = exact.propagate(spec, stopping.FirstPositive(), 500)
    assert 0 < t.err_m1[-1] < 1e-9
    assert exact.conservation_residual(t)["max_excess"] <= 1e-12


def test_capability_errors(srw_spec):
    with pytest.raises(exact.CapabilityError):
        exact.propagate(process.MartingaleSpec(process.SUM, laws.make_c3(1.0, 0.5)),
                        stopping.FirstPositive(), 10)
    with pytest.raises(exact.CapabilityError):
        exact.propagate(srw_spec, stopping.Example1(1.0), 10)
    with pytest.raises(exact.CapabilityError):
        exact.propagate(process.MartingaleSpec(process.POLY2_COMPENSATED, srw_spec.law),
                        stopping.FirstPositive(), 10)
    with pytest.raises(exact.CapabilityError):
        exact.propagate(process.MartingaleSpec(process.SUM, laws.ce2_sequence()),
                        stopping.FirstPositive(), 10)
    with pytest.raises(ValueError):
        exact.propagate(srw_spec, stopping.FirstPositive(), 10, arithmetic_mode="rational")


def test_degenerate_law_never_stops():
    spec = process.MartingaleSpec(process.SUM, laws.LatticePmf.from_atoms([(0, F(1))]))
    t = exact.propagate(spec, stopping.FirstPositive(), 50)
    assert np.all(t.p_gt_n == 1) and np.all(t.L == 0) and np.all(t.R == 0)


def test_ce1_lower_bound_is_conclusive():
    b = exact.ce1_infinity_lower_bound(100)
    assert b["conclusive"] and b["lower_bound"] == pytest.approx(b["p_gt_N"] - 0.01)
    # the alive mass can only shrink with more steps, and stays above the bound
    later = exact.ce1_infinity_lower_bound(2000)
    assert b["lower_bound"] <= later["p_gt_N"] <= b["p_gt_N"]


def test_moments_and_csv(tmp_path, srw_spec, first_positive):
    t = exact.propagate(srw_spec, first_positive, 100, p_list=(2, 3, 1.5))
    with pytest.raises(KeyError):
        t.moment(4)
    np.testing.assert_allclose(t.moment(1.5)[1], 0.5)
    path = tmp_path / "t.csv"
    t.to_csv(path)
    header = path.read_text().splitlines()[0].split(",")
    assert header == ["n", "p_gt_n", "L_n", "R_n", "m2_alive", "m3_alive", "m1_5_alive",
                      "err_mass", "err_budget"]
    assert len(path.read_text().splitlines()) == 101
