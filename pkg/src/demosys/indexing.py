"""Index bookkeeping for the level-structured system.

Flat indices k = 1, 2, 3, ... are grouped into levels: level n holds the
2^n indices k_{n-1}+1, ..., k_n where k_n = 2(2^n - 1).  Position j of
level n owns the dyadic interval obtained by cutting (-2^{-n+1}, -2^{-n}]
into 2^n equal pieces, ordered left to right, and the Rademacher function
with the same flat index.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction


@dataclass(frozen=True, order=True)
class LevelPosition:
    n: int
    j: int

    def __post_init__(self):
        if self.n < 1:
            raise ValueError(f"level must be >= 1, got {self.n}")
        if not 1 <= self.j <= 2 ** self.n:
            raise ValueError(f"position j={self.j} outside 1..2^{self.n}")


@dataclass(frozen=True)
class DyadicInterval:
    """Left-open, right-closed interval (left, right] with dyadic endpoints."""

    left: Fraction
    right: Fraction

    @property
    def length(self) -> Fraction:
        return self.right - self.left

    def __contains__(self, x) -> bool:
        x = Fraction(x)
        return self.left < x <= self.right

    def overlap(self, other: "DyadicInterval") -> Fraction:
        lo = max(self.left, other.left)
        hi = min(self.right, other.right)
        return max(hi - lo, Fraction(0))


def level_boundary(n: int) -> int:
    """Last flat index of level n, with k_0 = 0."""
    if n < 0:
        raise ValueError(f"level must be >= 0, got {n}")
    return 2 * (2 ** n - 1)


def to_level(k: int) -> LevelPosition:
    if k < 1:
        raise ValueError(f"flat index must be >= 1, got {k}")
    # k_{n-1} < k <= k_n  <=>  2^n < k + 2 <= 2^{n+1}
    n = (k + 1).bit_length() - 1
    return LevelPosition(n, k - level_boundary(n - 1))


def to_flat(n: int, j: int) -> int:
    pos = LevelPosition(n, j)
    return level_boundary(pos.n - 1) + pos.j


def rademacher_index(n: int, j: int) -> int:
    """Index of the Rademacher function paired with position (n, j)."""
    return to_flat(n, j)


def support_interval(n: int, j: int) -> DyadicInterval:
    pos = LevelPosition(n, j)
    width = Fraction(1, 2 ** (2 * pos.n))
    left = -Fraction(2, 2 ** pos.n) + (pos.j - 1) * width
    return DyadicInterval(left, left + width)


def locate(x) -> LevelPosition | None:
    """Position whose support interval contains x, or None (x <= -1 or x >= 0)."""
    x = Fraction(x)
    if not -1 < x < 0:
        return None
    # x in (-2^{-n+1}, -2^{-n}]  <=>  2^{-n} <= -x < 2^{-n+1}
    y = -x
    n = 1
    while Fraction(1, 2 ** n) > y:
        n += 1
    band_left = -Fraction(2, 2 ** n)
    width = Fraction(1, 2 ** (2 * n))
    # right-closed pieces: j = ceil((x - band_left) / width)
    offset = (x - band_left) / width
    j = -((-offset.numerator) // offset.denominator)
    return LevelPosition(n, j)
