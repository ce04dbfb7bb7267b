from fractions import Fraction

import pytest
from hypothesis import given, strategies as st

from demosys.indexing import (
    LevelPosition,
    level_boundary,
    locate,
    rademacher_index,
    support_interval,
    to_flat,
    to_level,
)


def test_first_indices():
    assert [to_level(k) for k in range(1, 7)] == [
        LevelPosition(1, 1), LevelPosition(1, 2),
        LevelPosition(2, 1), LevelPosition(2, 2), LevelPosition(2, 3), LevelPosition(2, 4),
    ]
    assert level_boundary(0) == 0
    assert level_boundary(8) == 510


@given(st.integers(min_value=1, max_value=10**12))
def test_flat_level_roundtrip(k):
    pos = to_level(k)
    assert 1 <= pos.j <= 2 ** pos.n
    assert to_flat(pos.n, pos.j) == k
    assert rademacher_index(pos.n, pos.j) == k


def test_bad_positions():
    with pytest.raises(ValueError):
        LevelPosition(0, 1)
    with pytest.raises(ValueError):
        LevelPosition(2, 5)
    with pytest.raises(ValueError):
        to_level(0)


@pytest.mark.parametrize("n", range(1, 7))
def test_supports_tile_their_band(n):
    ivs = [support_interval(n, j) for j in range(1, 2 ** n + 1)]
    assert ivs[0].left == Fraction(-2, 2 ** n)
    assert ivs[-1].right == Fraction(-1, 2 ** n)
    for a, b in zip(ivs, ivs[1:]):
        assert a.right == b.left
        assert a.overlap(b) == 0
    assert all(iv.length == Fraction(1, 4 ** n) for iv in ivs)


def test_half_open_endpoints():
    iv = support_interval(1, 1)  # (-1, -3/4]
    assert Fraction(-3, 4) in iv
    assert Fraction(-1) not in iv
    assert locate(Fraction(-3, 4)) == LevelPosition(1, 1)
    assert locate(Fraction(-1, 2)) == LevelPosition(1, 2)
    assert locate(0) is None and locate(Fraction(1, 3)) is None


@given(st.integers(min_value=1, max_value=20), st.data())
def test_locate_inverts_support(n, data):
    j = data.draw(st.integers(min_value=1, max_value=2 ** n))
    iv = support_interval(n, j)
    assert locate(iv.right) == LevelPosition(n, j)
    assert locate((iv.left + iv.right) / 2) == LevelPosition(n, j)
