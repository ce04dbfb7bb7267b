import math

import numpy as np
import pytest
from hypothesis import assume, given, settings, strategies as st

from demosys import oracles
from demosys.rademacher import (
    SignSumDistribution,
    SumOptions,
    WeightedLevelGroup,
    absolute_moment,
    convolve,
    group_distribution,
    rademacher_eval,
    rademacher_sum_norm,
)

coef = st.floats(min_value=0.05, max_value=20.0)
small_groups = st.lists(st.tuples(coef, st.integers(min_value=1, max_value=6)), min_size=1, max_size=4)
exponent = st.floats(min_value=1.0, max_value=8.0)


def norm(groups, p, **kw):
    return rademacher_sum_norm([WeightedLevelGroup.of(a, m) for a, m in groups], p,
                               SumOptions(**kw) if kw else None)


def expand(groups):
    return [a for a, m in groups for _ in range(m)]


def test_rademacher_values():
    assert [rademacher_eval(1, t) for t in (0.0, 0.25, 0.5, 0.75, 1.0)] == [1, 1, -1, -1, 1]
    assert [rademacher_eval(2, t) for t in (0.0, 0.25, 0.5, 0.75)] == [1, -1, 1, -1]


def test_frozen_moments():
    # E|e1 + e2|^4 = 8
    assert norm([(1.0, 2)], 4.0).value == pytest.approx(8 ** 0.25, rel=1e-15)
    # E|e1 + e2 + e3| = 3/2
    assert norm([(1.0, 3)], 1.0).value == pytest.approx(1.5, rel=1e-15)
    assert norm([(3.0, 1), (4.0, 1)], 2.0).value == pytest.approx(5.0, rel=1e-15)


def test_group_distribution_is_binomial():
    d = group_distribution((0.5, 4))
    assert d.as_dict() == {-2.0: 1 / 16, -1.0: 4 / 16, 0.0: 6 / 16, 1.0: 4 / 16, 2.0: 1 / 16}


def test_distribution_validation():
    with pytest.raises(ValueError):
        SignSumDistribution(np.array([0.0, 1.0]), np.array([0.5, 0.5]))
    with pytest.raises(ValueError):
        SignSumDistribution(np.array([-1.0, 1.0]), np.array([0.5, 0.6]))


@given(small_groups, exponent)
def test_exact_route_matches_enumeration(groups, p):
    assume(len(expand(groups)) <= 12)
    res = norm(groups, p)
    assert res.method == "exact"
    ref = oracles.enumerated_moment(expand(groups), p)
    assert res.value ** p == pytest.approx(ref, rel=1e-10)


@given(small_groups, coef, st.integers(1, 6), exponent)
def test_convolution_matches_joint_atoms(groups, a, m, p):
    d = group_distribution((a, m))
    for g in groups:
        d = convolve(d, group_distribution(g))
    assert d.exact and d.merge_error == 0
    direct = norm(groups + [(a, m)], p).value ** p
    assert absolute_moment(d, p).value == pytest.approx(direct, rel=1e-10)


@given(small_groups, exponent, exponent)
def test_norm_nondecreasing_in_p(groups, p, q):
    lo, hi = sorted((p, q))
    assert norm(groups, lo).value <= norm(groups, hi).value * (1 + 1e-12)


@given(small_groups, st.floats(min_value=2.0, max_value=8.0))
def test_khintchine_sandwich(groups, p):
    l2 = math.sqrt(sum(a * a * m for a, m in groups))
    assert norm(groups, 2.0).value == pytest.approx(l2, rel=1e-12)
    assert l2 * (1 - 1e-12) <= norm(groups, p).value <= math.sqrt(p) * l2
    assert norm(groups, 1.0).value >= l2 / math.sqrt(2) * (1 - 1e-12)


@given(coef, st.integers(2, 8), exponent)
def test_group_split_invariance(a, m, p):
    whole = norm([(a, m)], p).value
    split = norm([(a, 1)] * m, p).value
    assert whole == pytest.approx(split, rel=1e-12)


@given(small_groups, exponent, st.floats(min_value=0.1, max_value=100.0))
def test_homogeneity(groups, p, t):
    scaled = [(a * t, m) for a, m in groups]
    assert norm(scaled, p).value == pytest.approx(t * norm(groups, p).value, rel=1e-10)


@settings(max_examples=25, deadline=None)
@given(st.lists(st.tuples(coef, st.integers(20, 400)), min_size=2, max_size=4), exponent)
def test_merged_route_within_its_bound(groups, p):
    exact = norm(groups, p)
    assume(exact.method == "exact")
    merged = norm(groups, p, budget=10, grid_points=2048)
    assert merged.method == "merged"
    assert abs(merged.value - exact.value) <= merged.error_bound * (1 + 1e-9) + 1e-12 * exact.value


def test_merged_default_on_large_levels():
    res = norm([(1.0, 2 ** 12), (0.3, 2 ** 11), (0.01, 2 ** 10)], 3.0)
    assert res.method == "merged"
    assert res.error_bound / res.value < 5e-3


def test_monte_carlo_route_is_seeded():
    groups = [(1.0, 60), (0.37, 80)]
    exact = norm(groups, 3.0)
    kw = dict(budget=100, merge_tol=1e-9, mc_samples=200_000, seed=7)
    a, b = norm(groups, 3.0, **kw), norm(groups, 3.0, **kw)
    assert a.method == "monte-carlo" and a.seed == 7
    assert a.log2 == b.log2
    assert abs(a.value - exact.value) <= 5 * a.std_error
    assert norm(groups, 3.0, **{**kw, "seed": 8}).log2 != a.log2


def test_deep_coefficients_do_not_underflow():
    res = rademacher_sum_norm([WeightedLevelGroup(-3000.0, 4), WeightedLevelGroup(-3001.0, 2)], 7.5)
    ref = oracles.enumerated_moment([1.0] * 4 + [0.5] * 2, 7.5) ** (1 / 7.5)
    assert res.log2 == pytest.approx(-3000.0 + math.log2(ref), abs=1e-12)
