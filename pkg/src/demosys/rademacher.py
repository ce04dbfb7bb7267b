"""Rademacher functions and exact absolute moments of weighted sign sums.

A sum  sum_n a_n * (eps_1 + ... + eps_{m_n})  over independent signs is
handled as a product of symmetric binomial laws.  Three evaluation routes
exist, chosen by state count:

* ``exact``: full product of atoms, no approximation;
* ``merged``: atoms snapped to a common lattice of spacing h and convolved
  there; every realization moves by at most the tracked displacement, so
  by Minkowski the L^p norm moves by at most the same amount;
* ``monte-carlo``: seeded sampling with a reported standard error, used
  only when a caller-fixed merge tolerance cannot be honoured.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, Sequence

import numpy as np
from scipy import signal, special, stats

DEFAULT_BUDGET = 2_000_000
DEFAULT_GRID_POINTS = 1 << 16
DEFAULT_MC_SAMPLES = 1_000_000
DEFAULT_SEED = 0

# p-th powers are accumulated in log space once they could pass 2^512.
LOG2_LINEAR_LIMIT = 512.0
_LN2 = math.log(2.0)


def exp2(x: float) -> float:
    try:
        return 2.0 ** x
    except OverflowError:
        return math.inf


def log2_abs(x: float) -> float:
    return math.log2(abs(x)) if x != 0 else -math.inf


def rademacher_eval(k: int, t: float) -> int:
    """r_k(t): +1 when floor(2^k t) is even, -1 when odd; r_k(1) = +1."""
    if k < 1:
        raise ValueError(f"Rademacher index must be >= 1, got {k}")
    if not 0.0 <= t <= 1.0:
        raise ValueError(f"t={t} outside [0, 1]")
    if t == 1.0:
        return 1
    num, den = float(t).as_integer_ratio()
    return 1 if ((num << k) // den) % 2 == 0 else -1


@dataclass(frozen=True)
class WeightedLevelGroup:
    """``count`` distinct signs sharing one coefficient, kept as log2|a|."""

    log2_abs: float
    count: int

    def __post_init__(self):
        if self.count < 0:
            raise ValueError(f"count must be >= 0, got {self.count}")

    @classmethod
    def of(cls, coefficient: float, count: int) -> "WeightedLevelGroup":
        return cls(log2_abs(coefficient), int(count))

    @property
    def coefficient(self) -> float:
        return exp2(self.log2_abs)


@dataclass(frozen=True, eq=False)
class SignSumDistribution:
    values: np.ndarray
    probs: np.ndarray
    exact: bool = True
    merge_error: float = 0.0

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        probs = np.asarray(self.probs, dtype=np.float64)
        if values.shape != probs.shape or values.ndim != 1 or values.size == 0:
            raise ValueError("values and probs must be equal-length nonempty 1-D arrays")
        if np.any(probs <= 0):
            raise ValueError("probabilities must be strictly positive")
        if abs(probs.sum() - 1.0) > 1e-12:
            raise ValueError(f"probabilities sum to {probs.sum()!r}, not 1")
        if np.any(np.diff(values) <= 0):
            raise ValueError("atom values must be strictly increasing")
        scale = max(1.0, float(np.max(np.abs(values))))
        if (np.max(np.abs(values + values[::-1])) > 1e-12 * scale
                or np.max(np.abs(probs - probs[::-1])) > 1e-12):
            raise ValueError("distribution is not symmetric about 0")
        if self.merge_error < 0:
            raise ValueError("merge error bound must be >= 0")
        values.flags.writeable = False
        probs.flags.writeable = False
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "probs", probs)

    def __len__(self) -> int:
        return self.values.size

    def as_dict(self) -> dict[float, float]:
        return dict(zip(self.values.tolist(), self.probs.tolist()))


@dataclass(frozen=True)
class MomentResult:
    value: float
    log2_value: float
    error_bound: float = 0.0


@dataclass(frozen=True)
class SumOptions:
    """Route selection for :func:`rademacher_sum_norm`.

    ``merge_tol=None`` picks the lattice spacing from ``grid_points``; an
    explicit tolerance whose lattice would exceed ``budget`` points forces
    the Monte Carlo route.
    """

    budget: int = DEFAULT_BUDGET
    merge_tol: float | None = None
    grid_points: int = DEFAULT_GRID_POINTS
    mc_samples: int = DEFAULT_MC_SAMPLES
    seed: int = DEFAULT_SEED

    def __post_init__(self):
        if self.budget < 1 or self.grid_points < 16 or self.mc_samples < 2:
            raise ValueError("budget, grid_points and mc_samples must be positive")
        if self.merge_tol is not None and self.merge_tol < 0:
            raise ValueError("merge_tol must be >= 0")


@dataclass(frozen=True)
class SumNorm:
    """L^p([0,1]) norm of a sign sum, stored as log2 to survive deep levels."""

    log2: float
    method: str
    error_bound: float = 0.0
    std_error: float | None = None
    seed: int | None = None

    @property
    def value(self) -> float:
        return exp2(self.log2)

    def __float__(self) -> float:
        return self.value


@lru_cache(maxsize=4096)
def _binomial_atoms(m: int) -> tuple[np.ndarray, np.ndarray]:
    """Values m - 2t (t = m..0, ascending) and their binomial(m, 1/2) masses."""
    t = np.arange(m, -1, -1)
    values = (m - 2 * t).astype(np.float64)
    probs = stats.binom.pmf(t, m, 0.5)
    # exact symmetry; pmf evaluation is not bit-symmetric for large m
    probs = 0.5 * (probs + probs[::-1])
    values.flags.writeable = False
    probs.flags.writeable = False
    return values, probs


def group_distribution(group: WeightedLevelGroup | tuple[float, int]) -> SignSumDistribution:
    if not isinstance(group, WeightedLevelGroup):
        group = WeightedLevelGroup.of(*group)
    a = group.coefficient
    if group.count == 0 or a == 0:
        return SignSumDistribution(np.zeros(1), np.ones(1))
    values, probs = _binomial_atoms(group.count)
    keep = probs > 0  # masses below the double range are dropped
    probs = probs[keep] / probs[keep].sum()
    return SignSumDistribution(a * values[keep], probs)


def _merge_sorted(values: np.ndarray, probs: np.ndarray, tol: float):
    """Collapse atoms onto bins of width tol (tol=0: equal values only).

    Returns merged values, probs and the largest displacement of any atom.
    """
    if tol == 0:
        uniq, inverse = np.unique(values, return_inverse=True)
        return uniq, np.bincount(inverse, weights=probs), 0.0
    bins = np.rint(values / tol).astype(np.int64)
    uniq, inverse = np.unique(bins, return_inverse=True)
    mass = np.bincount(inverse, weights=probs)
    mean = np.bincount(inverse, weights=probs * values) / mass
    # keep the odd symmetry of rint exact
    mean = 0.5 * (mean - mean[::-1])
    displacement = float(np.max(np.abs(values - mean[inverse])))
    return mean, mass, displacement


def convolve(d1: SignSumDistribution, d2: SignSumDistribution,
             merge_tol: float = 0.0) -> SignSumDistribution:
    """Law of the independent sum; atoms within merge_tol are pooled."""
    if merge_tol < 0:
        raise ValueError("merge_tol must be >= 0")
    values = np.add.outer(d1.values, d2.values).ravel()
    probs = np.multiply.outer(d1.probs, d2.probs).ravel()
    order = np.argsort(values, kind="stable")
    values, probs, moved = _merge_sorted(values[order], probs[order], merge_tol)
    probs = probs / probs.sum()
    error = d1.merge_error + d2.merge_error + moved
    return SignSumDistribution(values, probs, exact=d1.exact and d2.exact and moved == 0,
                               merge_error=error)


def _log2_moment(values: np.ndarray, probs: np.ndarray, p: float) -> float:
    """log2 of sum probs * |values|^p, switching to log space near overflow."""
    mask = (values != 0) & (probs > 0)
    if not np.any(mask):
        return -math.inf
    a = np.abs(values[mask])
    w = probs[mask]
    lp = p * np.log2(a)
    if lp.max() < LOG2_LINEAR_LIMIT and lp.min() > -LOG2_LINEAR_LIMIT:
        return math.log2(float(np.dot(w, a ** p)))
    return float(special.logsumexp(lp * _LN2, b=w)) / _LN2


def absolute_moment(d: SignSumDistribution, p: float) -> MomentResult:
    """E|X|^p of a finite law; merged laws carry a Lipschitz error bound."""
    if p < 1:
        raise ValueError(f"p must be >= 1, got {p}")
    lg = _log2_moment(d.values, d.probs, p)
    value = exp2(lg)
    bound = 0.0
    if d.merge_error > 0:
        reach = float(np.max(np.abs(d.values))) + d.merge_error
        bound = p * reach ** (p - 1) * d.merge_error
    return MomentResult(value, lg, bound)


def _live_groups(groups: Iterable[WeightedLevelGroup]):
    live = [g for g in groups if g.count > 0 and g.log2_abs > -math.inf]
    if not live:
        return [], -math.inf
    scale = max(g.log2_abs for g in live)
    rel = []
    for g in live:
        b = exp2(g.log2_abs - scale)
        if b > 0:
            rel.append((b, g.count))
    return rel, scale


def _exact_atoms(rel: Sequence[tuple[float, int]]):
    values = np.zeros(1)
    probs = np.ones(1)
    for b, m in rel:
        gv, gp = _binomial_atoms(m)
        values = np.add.outer(values, b * gv).ravel()
        probs = np.multiply.outer(probs, gp).ravel()
    return values, probs


def _lattice_moment(rel, p: float, h: float):
    """Moment after snapping every group to multiples of h; returns (log2, displacement)."""
    acc = np.ones(1)
    displacement = 0.0
    for b, m in rel:
        gv, gp = _binomial_atoms(m)
        exact = b * gv
        z = np.rint(exact / h).astype(np.int64)
        displacement += float(np.max(np.abs(exact - h * z)))
        half = int(z.max())
        pmf = np.bincount(z + half, weights=gp, minlength=2 * half + 1)
        if pmf.size > 1:
            acc = signal.convolve(acc, pmf, method="auto")
            np.maximum(acc, 0.0, out=acc)
    half = (acc.size - 1) // 2
    grid = h * np.arange(-half, half + 1, dtype=np.float64)
    # FFT round-off can leave mass in far tails; cap each point by the
    # sub-Gaussian tail of the displaced sum
    variance = sum(b * b * m for b, m in rel)
    reach = np.maximum(np.abs(grid) - displacement, 0.0)
    acc = np.minimum(acc, 2.0 * np.exp(-reach ** 2 / (2.0 * variance)))
    return _log2_moment(grid, acc, p), displacement


def _stream_key(rel, p: float) -> int:
    text = repr((p, [(float(b).hex(), m) for b, m in rel]))
    return int.from_bytes(hashlib.sha256(text.encode()).digest()[:8], "little")


def _monte_carlo(rel, p: float, samples: int, seed: int):
    rng = np.random.Generator(np.random.PCG64(
        np.random.SeedSequence(seed, spawn_key=(_stream_key(rel, p),))))
    sigma = math.sqrt(sum(b * b * m for b, m in rel))
    chunk = 1 << 18
    total = 0.0
    total_sq = 0.0
    done = 0
    while done < samples:
        size = min(chunk, samples - done)
        x = np.zeros(size)
        for b, m in rel:
            x += b * (m - 2.0 * rng.binomial(m, 0.5, size=size))
        y = np.abs(x / sigma) ** p
        total += float(y.sum())
        total_sq += float(np.dot(y, y))
        done += size
    mean = total / samples
    var = max(total_sq / samples - mean * mean, 0.0)
    if mean == 0:
        return -math.inf, 0.0
    se_mean = math.sqrt(var / samples)
    log2_norm = (math.log2(mean) / p) + math.log2(sigma)
    # delta method: d(norm)/d(mean) = norm / (p * mean)
    se_norm = exp2(log2_norm) * se_mean / (p * mean)
    return log2_norm, se_norm


def rademacher_sum_norm(groups: Sequence[WeightedLevelGroup], p: float,
                        options: SumOptions | None = None) -> SumNorm:
    """(E|sum_g a_g S_g|^p)^{1/p} with S_g independent sums of count_g signs."""
    if p < 1:
        raise ValueError(f"p must be >= 1, got {p}")
    opts = options or SumOptions()
    rel, scale = _live_groups(groups)
    if not rel:
        return SumNorm(-math.inf, "exact")
    states = math.prod(m + 1 for _, m in rel)
    if states <= opts.budget:
        values, probs = _exact_atoms(rel)
        return SumNorm(_log2_moment(values, probs, p) / p + scale, "exact")

    span = 2.0 * sum(b * m for b, m in rel)
    if opts.merge_tol is None:
        h = max(span / opts.grid_points, 1e-12 * span)
    else:
        h = max(opts.merge_tol / exp2(scale), 1e-12 * span)
        if span / h > opts.budget:
            lg, se = _monte_carlo(rel, p, opts.mc_samples, opts.seed)
            return SumNorm(lg + scale, "monte-carlo", std_error=se * exp2(scale),
                           seed=opts.seed)
    lg, moved = _lattice_moment(rel, p, h)
    return SumNorm(lg / p + scale, "merged", error_bound=moved * exp2(scale))
