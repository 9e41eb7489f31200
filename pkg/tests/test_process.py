from fractions import Fraction as F

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from martstop import laws, process
from test_laws import mixtures


@given(mixtures, st.integers(-20, 20), st.integers(0, 50))
def test_one_step_martingale_property_is_exact(law, s, n):
    # E[M_{n+1} - M_n | S_n = s] = 0 for every variant, computed with fractions
    sumsq = s * s + 7
    for variant in (process.SUM, process.POLY2_COMPENSATED):
        m0 = process.martingale_value(variant, s, sumsq, n)
        drift = sum(
            m * (process.martingale_value(variant, s + x, sumsq + x * x, n + 1) - m0)
            for x, m in law.atoms()
        )
        assert drift == 0
    if law.variance == 1:
        m0 = process.martingale_value(process.POLY2_VARIANCE, s, sumsq, n)
        drift = sum(m * (process.martingale_value(process.POLY2_VARIANCE, s + x, 0, n + 1) - m0)
                    for x, m in law.atoms())
        assert drift == 0


def test_path_variants_agree_with_direct_formulas():
    law = laws.make_c1(laws.simple_random_walk(False))
    for variant in process.VARIANTS:
        spec = process.MartingaleSpec(variant, law)
        M, S = process.path(spec, 200, np.random.default_rng(3))
        n = np.arange(1, 201)
        if variant == process.SUM:
            np.testing.assert_array_equal(M, S)
        else:
            # SRW increments square to 1, so both quadratic variants coincide
            np.testing.assert_array_equal(M, S * S - n)


def test_compensated_square_for_non_unit_increments():
    spec = process.MartingaleSpec(process.POLY2_COMPENSATED, laws.make_c3(1.0, 0.5))
    st_ = process.init(spec)
    xs = [0.5, -1.0, 2.25]
    for x in xs:
        st_ = process.advance(st_, spec, x)
    S = sum(xs)
    assert st_.M == pytest.approx(S * S - sum(x * x for x in xs))
    assert st_.n == 3


def test_square_minus_n_requires_unit_variance():
    with pytest.raises(process.SpecError):
        process.MartingaleSpec(process.POLY2_VARIANCE, laws.make_c3(1.0, 0.5))
    with pytest.raises(process.SpecError):
        process.MartingaleSpec(process.POLY2_VARIANCE, laws.ce1_sequence())
    with pytest.raises(process.SpecError):
        process.MartingaleSpec("cubic", laws.make_c1(laws.simple_random_walk()))


def test_indexed_spec_uses_step_laws():
    spec = process.MartingaleSpec(process.SUM, laws.ce1_sequence(exact=True))
    assert spec.indexed
    assert spec.law_at(3).atoms()[0] == (-1, F(1, 18))


def test_conditional_variance_check():
    srw = process.MartingaleSpec(process.SUM, laws.make_c1(laws.simple_random_walk(False)))
    out = process.conditional_variance_check(srw, 3, 20000, seed=1)
    assert out["unit_variance"] and out["poly2_variance_eligible"]
    for row in out["steps"]:
        assert row["exact"] == 1.0
        assert row["ci"][0] <= 1.0 + 1e-3 and row["ci"][1] >= 1.0 - 1e-3
    ce1 = process.MartingaleSpec(process.SUM, laws.ce1_sequence())
    out = process.conditional_variance_check(ce1, 4, 20000, seed=2)
    assert not out["unit_variance"]
    assert [r["exact"] for r in out["steps"]] == pytest.approx([1 / j**2 for j in range(1, 5)])
