"""The orthonormal family F_l on [-1, 1].

Element k sitting at level n, position j is

    sqrt(1 - 2^{-n/l}) * 2^n * 1_{Delta_j^n}(x)   for x in [-1, 0),
    2^{-n/(2l)} * r_k(x)                          for x in [0, 1].

Left pieces have disjoint supports and right pieces are independent signs,
so the L^p norm of any finite combination splits into a closed-form left
sum plus a Rademacher moment.  All magnitudes are carried as log2 values
because |c_{n,l}| grows like 2^{n(p-2)/p}.
"""

from __future__ import annotations

import math
import os
import threading
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import mpmath
import numpy as np

from .indexing import locate, to_flat, to_level
from .rademacher import (
    SumOptions,
    WeightedLevelGroup,
    exp2,
    log2_abs,
    rademacher_eval,
    rademacher_sum_norm,
)

P_MAX = 64.0
PRECISION_ENV = "DEMOSYS_PRECISION_BITS"


class DomainError(ValueError):
    """A numeric argument lies outside the domain an operation accepts."""


@dataclass(frozen=True)
class SystemParams:
    l: float
    precision_bits: int = 53

    def __post_init__(self):
        if not (math.isfinite(self.l) and self.l > 0):
            raise DomainError(f"shape parameter l must be a positive real, got {self.l}")
        if self.precision_bits < 53:
            raise DomainError("precision below binary64 is not supported")

    @classmethod
    def from_env(cls, l: float, precision_bits: int | None = None) -> "SystemParams":
        if precision_bits is None:
            precision_bits = int(os.environ.get(PRECISION_ENV, "53"))
        return cls(l, precision_bits)

    @property
    def high_precision(self) -> bool:
        return self.precision_bits > 53


def check_exponent(p: float, p_max: float = P_MAX) -> float:
    if not (math.isfinite(p) and 1.0 <= p <= p_max):
        raise DomainError(f"exponent p={p} outside [1, {p_max}]")
    return float(p)


def conjugate(p: float) -> float:
    if p <= 1:
        raise DomainError(f"conjugate exponent needs p > 1, got {p}")
    return p / (p - 1.0)


def log2_one_minus_pow2(x: float) -> float:
    """log2(1 - 2^{-x}) for x > 0 without cancellation."""
    return math.log2(-math.expm1(-x * math.log(2.0)))


def log2_single_norm_pow(n: int, l: float, p: float) -> float:
    """log2 of 2^{n(p-2)} (1-2^{-n/l})^{p/2} + 2^{-np/(2l)}, i.e. of |c_{n,l}|^p."""
    left = n * (p - 2.0) + 0.5 * p * log2_one_minus_pow2(n / l)
    right = -n * p / (2.0 * l)
    return float(np.logaddexp2(left, right))


class NormTable:
    """Memo of log2 |c_{n,l}|^p keyed by (n, l, p).

    Entries are pure functions of their key, so racing writers store the
    same value and the last write wins harmlessly.
    """

    def __init__(self):
        self._data: dict[tuple[int, float, float], float] = {}
        self._lock = threading.Lock()

    def log2_pow(self, n: int, l: float, p: float) -> float:
        key = (n, float(l), float(p))
        hit = self._data.get(key)
        if hit is None:
            hit = log2_single_norm_pow(n, l, p)
            with self._lock:
                self._data[key] = hit
        return hit

    def log2_norm(self, n: int, l: float, p: float) -> float:
        """log2 |c_{n,l}| in L^p."""
        return self.log2_pow(n, l, p) / p

    def log2_index_norm(self, k: int, l: float, p: float) -> float:
        """log2 |b_{k,l}|, which equals log2 |c_{n,l}| at the level of k."""
        return self.log2_norm(to_level(k).n, l, p)

    def __len__(self) -> int:
        return len(self._data)


NORMS = NormTable()


def _mp_single_norm_pow(n: int, l: float, p: float, bits: int):
    with mpmath.workprec(bits):
        n_, l_, p_ = mpmath.mpf(n), mpmath.mpf(l), mpmath.mpf(p)
        two = mpmath.mpf(2)
        return (two ** (n_ * (p_ - 2)) * (1 - two ** (-n_ / l_)) ** (p_ / 2)
                + two ** (-n_ * p_ / (2 * l_)))


def eval_f(k: int, x: float, params: SystemParams) -> float:
    if not -1.0 <= x <= 1.0:
        raise DomainError(f"x={x} outside [-1, 1]")
    pos = to_level(k)
    n, l = pos.n, params.l
    if x >= 0:
        return exp2(-n / (2.0 * l)) * rademacher_eval(k, x)
    if locate(x) == pos:
        return math.sqrt(-math.expm1(-n / l * math.log(2.0))) * 2.0 ** n
    return 0.0


def single_norm(n: int, params: SystemParams, p: float):
    """|c_{n,l}| = ||f_k||_p for any k at level n."""
    if n < 1:
        raise DomainError(f"level must be >= 1, got {n}")
    check_exponent(p)
    if params.high_precision:
        with mpmath.workprec(params.precision_bits):
            return _mp_single_norm_pow(n, params.l, p, params.precision_bits) ** (1 / mpmath.mpf(p))
    return exp2(NORMS.log2_norm(n, params.l, p))


def inner_product(k: int, m: int, params: SystemParams) -> float:
    """<f_k, f_m> on [-1, 1] in closed form."""
    pk, pm = to_level(k), to_level(m)
    if k != m:
        # distinct positions never share a left support, and r_k, r_m are
        # orthogonal for k != m
        return 0.0
    left_mass = -math.expm1(-pk.n / params.l * math.log(2.0))
    right_mass = exp2(-pk.n / params.l)
    return left_mass + right_mass


def norm_product(k: int, params: SystemParams, p: float):
    """||f_k||_p * ||f_k||_{p'}: the pairing of F_l with itself under L^2."""
    check_exponent(p)
    if p <= 1:
        raise DomainError("norm product needs p > 1")
    n = to_level(k).n
    return single_norm(n, params, p) * single_norm(n, params, conjugate(p))


def log2_norm_product(n: int, l: float, p: float) -> float:
    return NORMS.log2_norm(n, l, p) + NORMS.log2_norm(n, l, conjugate(p))


@dataclass(frozen=True)
class NormResult:
    log2: float
    method: str = "exact"
    error_bound: float = 0.0
    std_error: float | None = None
    seed: int | None = None

    @property
    def value(self):
        if isinstance(self.log2, mpmath.mpf):
            return mpmath.mpf(2) ** self.log2
        return exp2(self.log2)

    def __float__(self) -> float:
        return float(self.value)


@dataclass(frozen=True)
class LevelGroup:
    """``count`` indices of level n sharing coefficient 2^{log2_coeff} in absolute value."""

    n: int
    count: int
    log2_coeff: float

    def __post_init__(self):
        if self.n < 1:
            raise DomainError(f"level must be >= 1, got {self.n}")
        if self.count < 0:
            raise DomainError("count must be >= 0")


@dataclass(frozen=True)
class Combination:
    """Finite linear combination, reduced to per-level coefficient groups.

    Only the number of indices per (level, |coefficient|) matters for any
    L^p norm, so explicit terms are folded into that form on construction.
    """

    groups: tuple[LevelGroup, ...]

    def __post_init__(self):
        used: dict[int, int] = {}
        for g in self.groups:
            used[g.n] = used.get(g.n, 0) + g.count
        for n, c in used.items():
            if c > 2 ** n:
                raise DomainError(f"level {n} has only {2 ** n} indices, {c} requested")

    @classmethod
    def from_terms(cls, terms: Iterable[tuple[int, float]]) -> "Combination":
        seen: set[int] = set()
        counts: dict[tuple[int, float], int] = {}
        for k, c in terms:
            if k in seen:
                raise DomainError(f"duplicate index {k}")
            seen.add(k)
            key = (to_level(k).n, abs(float(c)))
            counts[key] = counts.get(key, 0) + 1
        return cls(tuple(LevelGroup(n, m, log2_abs(c))
                         for (n, c), m in sorted(counts.items())))

    @classmethod
    def from_groups(cls, groups: Iterable[tuple[int, int, float]]) -> "Combination":
        """Grouped form: (level n, count, coefficient)."""
        return cls(tuple(LevelGroup(int(n), int(m), log2_abs(c)) for n, m, c in groups))

    @classmethod
    def from_positions(cls, terms: Iterable[tuple[int, int, float]]) -> "Combination":
        """Explicit form: (level n, position j, coefficient)."""
        return cls.from_terms((to_flat(n, j), c) for n, j, c in terms)

    @property
    def size(self) -> int:
        return sum(g.count for g in self.groups)


def combination_from_json(obj: Mapping) -> tuple[Combination, float, float]:
    """Parse ``{"l", "p", "terms": [{n, j, coeff}]}`` or the ``"groups"`` form.

    Raises KeyError/TypeError/ValueError on malformed input; DomainError on
    numeric-domain violations.
    """
    if not isinstance(obj, Mapping):
        raise TypeError("combination spec must be a JSON object")
    l = float(obj["l"])
    p = float(obj["p"])
    if "terms" in obj and "groups" in obj:
        raise ValueError("give either 'terms' or 'groups', not both")
    if "terms" in obj:
        comb = Combination.from_positions(
            (int(t["n"]), int(t["j"]), float(t["coeff"])) for t in obj["terms"])
    elif "groups" in obj:
        comb = Combination.from_groups(
            (int(g["n"]), int(g["count"]), float(g["coeff"])) for g in obj["groups"])
    else:
        raise KeyError("spec needs 'terms' or 'groups'")
    return comb, l, p


def grouped_norm(groups: Sequence[LevelGroup], params: SystemParams, p: float,
                 options: SumOptions | None = None) -> NormResult:
    """L^p[-1,1] norm of sum over groups of coeff * (sum of count elements at level n).

    left^p  = sum count |c|^p (1-2^{-n/l})^{p/2} 2^{n(p-2)}    (disjoint supports)
    right   = || sum c 2^{-n/(2l)} r_k ||_p on [0, 1]
    norm    = (left^p + right^p)^{1/p}
    """
    check_exponent(p)
    live = [g for g in groups if g.count > 0 and g.log2_coeff > -math.inf]
    if not live:
        return NormResult(-math.inf)
    if params.high_precision:
        hp = _grouped_norm_mp(live, params, p, options or SumOptions())
        if hp is not None:
            return hp
    l = params.l
    left_terms = [math.log2(g.count) + p * g.log2_coeff
                  + 0.5 * p * log2_one_minus_pow2(g.n / l) + g.n * (p - 2.0)
                  for g in live]
    log2_left = float(np.logaddexp2.reduce(left_terms))
    right = rademacher_sum_norm(
        [WeightedLevelGroup(g.log2_coeff - g.n / (2.0 * l), g.count) for g in live],
        p, options)
    log2_total = float(np.logaddexp2(log2_left, p * right.log2)) / p
    # (A + B^p)^{1/p} is 1-Lipschitz in B, so the right-part bound carries over
    return NormResult(log2_total, right.method, right.error_bound, right.std_error, right.seed)


def _grouped_norm_mp(groups, params: SystemParams, p: float, options: SumOptions):
    """Working-precision route for the exact path; None when over budget."""
    states = math.prod(g.count + 1 for g in groups)
    if states > min(options.budget, 200_000):
        return None
    bits = params.precision_bits
    with mpmath.workprec(bits):
        two = mpmath.mpf(2)
        p_ = mpmath.mpf(p)
        l_ = mpmath.mpf(params.l)
        left = mpmath.mpf(0)
        dist = {mpmath.mpf(0): mpmath.mpf(1)}
        for g in groups:
            c = two ** mpmath.mpf(g.log2_coeff)
            n_ = mpmath.mpf(g.n)
            left += g.count * c ** p_ * (1 - two ** (-n_ / l_)) ** (p_ / 2) * two ** (n_ * (p_ - 2))
            a = c * two ** (-n_ / (2 * l_))
            step = {}
            for t in range(g.count + 1):
                v = a * (g.count - 2 * t)
                w = mpmath.binomial(g.count, t) / two ** g.count
                step[v] = step.get(v, 0) + w
            nxt: dict = {}
            for v1, w1 in dist.items():
                for v2, w2 in step.items():
                    key = v1 + v2
                    nxt[key] = nxt.get(key, 0) + w1 * w2
            dist = nxt
        right = mpmath.fsum(w * abs(v) ** p_ for v, w in dist.items())
        total = left + right
        return NormResult(mpmath.log(total, 2) / p_, "exact")


def combination_norm(comb: Combination, params: SystemParams, p: float,
                     options: SumOptions | None = None) -> NormResult:
    if comb.size == 0:
        raise DomainError("combination has no terms")
    return grouped_norm(comb.groups, params, p, options)
