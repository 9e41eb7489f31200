from fractions import Fraction

import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st

from martstop.stats import SHIFT, ExactMoments, exact_sum

finite = st.floats(allow_nan=False, allow_infinity=False, min_value=-1e140, max_value=1e140)
arrays = st.lists(finite, min_size=0, max_size=60)


@given(arrays)
def test_exact_sum_equals_rational_sum(xs):
    assert Fraction(exact_sum(np.array(xs, dtype=float)), 1 << SHIFT) == sum(
        (Fraction(x) for x in xs), Fraction(0))


@given(arrays, st.randoms(use_true_random=False))
def test_order_independent(xs, rnd):
    ys = list(xs)
    rnd.shuffle(ys)
    assert ExactMoments.from_array(np.array(xs)) == ExactMoments.from_array(np.array(ys))


@given(arrays, st.lists(st.integers(0, 60), max_size=5))
def test_merge_of_any_split_equals_whole(xs, cuts):
    a = np.array(xs, dtype=float)
    bounds = sorted({0, len(xs), *[min(c, len(xs)) for c in cuts]})
    parts = [ExactMoments.from_array(a[i:j]) for i, j in zip(bounds, bounds[1:])]
    total = ExactMoments()
    for p in reversed(parts):
        total = total + p
    assert total == ExactMoments.from_array(a)


@settings(max_examples=50)
@given(st.lists(st.floats(-1e6, 1e6).filter(lambda x: x == 0 or abs(x) > 1e-100), min_size=2, max_size=200))
def test_mean_and_variance(xs):
    a = np.array(xs)
    m = ExactMoments.from_array(a)
    exact_mean = sum((Fraction(x) for x in xs), Fraction(0)) / len(xs)
    assert m.mean == float(exact_mean)
    ref = float(sum((Fraction(x) - exact_mean) ** 2 for x in xs) / (len(xs) - 1))
    assert m.var == ref


def test_subnormals_and_signs():
    xs = np.array([5e-324, -5e-324, 1e-310, 1.0, -1.0, 2.0**1000])
    assert Fraction(exact_sum(xs), 1 << SHIFT) == sum(Fraction(x) for x in xs)


@given(st.lists(st.floats(1e-100, 1e100) | st.floats(-1e100, -1e-100), max_size=40))
def test_second_sum_is_exact(xs):
    m = ExactMoments.from_array(np.array(xs, dtype=float))
    assert Fraction(m.s2, 1 << SHIFT) == sum((Fraction(x) ** 2 for x in xs), Fraction(0))


def test_empty_and_ci():
    e = ExactMoments()
    assert e.count == 0 and np.isnan(e.mean)
    m = ExactMoments.from_array(np.array([1.0, 2.0, 3.0]))
    lo, hi = m.ci()
    assert lo < 2.0 < hi
    assert m.summary()["count"] == 3
