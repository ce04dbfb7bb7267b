import math

import pytest
from hypothesis import given, settings, strategies as st

from demosys.fundamental import (
    DUAL,
    PRIMAL,
    LevelProfile,
    LevelRule,
    SearchConfig,
    bidemocracy_profile,
    brute_force_phi,
    candidate_profiles,
    check_partition,
    democracy_ratio,
    parity_partition,
    partition_sandwich,
    phi,
    phi_table,
    profile_norm,
    residue_partition,
    strictly_increasing,
    witness_sequence,
)
from demosys.system import DomainError, SystemParams

P1 = SystemParams(1.0)
CANDIDATES = SearchConfig(method="candidates")


def test_profile_basics():
    prof = LevelProfile.of({3: 2, 1: 1})
    assert prof.total == 3 and prof.levels == (1, 3)
    assert prof.vector() == (1, 0, 2)
    assert LevelProfile.from_vector((1, 0, 2)) == prof
    with pytest.raises(ValueError):
        LevelProfile.of({1: 3})


def test_phi_is_sqrt_m_in_l2():
    for m in (1, 5, 16, 100):
        assert phi(m, P1, 2.0).value == pytest.approx(math.sqrt(m), rel=1e-9)


def test_brute_force_frozen():
    value, prof = brute_force_phi(4, P1, 4.0)
    assert value == pytest.approx(profile_norm(prof, P1, 4.0).value, rel=1e-12)
    assert prof.total <= 4
    assert brute_force_phi(1, P1, 4.0)[0] == pytest.approx(1.0, rel=1e-14)


@pytest.mark.parametrize("l,p", [(1.0, 4.0), (2.0, 1.5), (4.0, 1.5), (0.5, 3.0)])
def test_candidates_close_to_exhaustive(l, p):
    params = SystemParams(l)
    for m in (3, 7, 12):
        ref, _ = brute_force_phi(m, params, p)
        got = phi(m, params, p, PRIMAL, CANDIDATES).value
        assert abs(got - ref) / ref < 0.1


def test_table_is_nondecreasing():
    table = phi_table([2 ** s for s in range(0, 11)], P1, 4.0)
    vals = table.values()
    assert all(a <= b for a, b in zip(vals, vals[1:]))
    dual = phi_table([2 ** s for s in range(0, 9)], P1, 4.0, DUAL)
    dvals = dual.values()
    assert all(a <= b for a, b in zip(dvals, dvals[1:]))


def test_phi_lower_bound_by_any_profile():
    for m in (16, 64):
        best = phi(m, P1, 4.0).value
        for prof in candidate_profiles(m, PRIMAL, 10, 50):
            assert profile_norm(prof, P1, 4.0).value <= best * (1 + 1e-12)


def test_democracy_ratio_frozen():
    e = democracy_ratio(4, SystemParams(2.0), 1.5)
    assert e.ratio == pytest.approx(1.0241, abs=5e-4)
    assert e.max_norm >= e.min_norm


def test_witness_ratio_increases_between_boundaries():
    rows = witness_sequence(SystemParams(2.0), 1.5, range(2, 13))
    assert strictly_increasing([r.ratio for r in rows])
    assert rows[0].ratio == pytest.approx(0.98948, rel=1e-4)
    assert rows[-1].ratio == pytest.approx(2.14862, rel=1e-4)


def test_bidemocracy_profile_shape():
    rows = bidemocracy_profile([16, 64, 256], P1, 4.0)
    assert len(rows) == 3


def test_partitions():
    check_partition(parity_partition(), 50)
    check_partition(residue_partition(3), 50)
    with pytest.raises(DomainError):
        check_partition([LevelRule(2, (0,), "even")], 10)


@settings(max_examples=15, deadline=None)
@given(st.integers(1, 64), st.sampled_from([2, 3]))
def test_sandwich_holds(m, nu):
    classes = parity_partition() if nu == 2 else residue_partition(nu)
    rep = partition_sandwich(classes, m, P1, 4.0)
    assert rep.holds
    assert rep.phi_tilde <= rep.phi * (1 + 1e-12)


def test_invalid_inputs():
    with pytest.raises(DomainError):
        phi(0, P1, 4.0)
    with pytest.raises(DomainError):
        phi(20, P1, 4.0, PRIMAL, SearchConfig(method="exhaustive"))
    with pytest.raises(ValueError):
        SearchConfig(method="greedy")
