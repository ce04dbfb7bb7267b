"""Fundamental functions, democracy ratios and witness sets.

Every norm of a normalized sum over an index set A depends on A only
through its level profile (m_1, m_2, ...), m_n = |A intersected with level n|.
Searches therefore run over profiles, never over explicit index sets.

Two search modes exist.  ``exhaustive`` enumerates every profile up to a
level cap by depth-first search, reusing the partial sign-sum law along
each branch.  ``candidates`` scores a fixed family of shapes (greedy fills,
single-level blocks, two-level splits of dyadic sizes and deep single-level
blocks).  Results always record which space was searched; neither is a
claim about the supremum over the whole infinite system.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

from .rademacher import SumOptions, _binomial_atoms, exp2
from .system import (
    NORMS,
    DomainError,
    LevelGroup,
    NormResult,
    SystemParams,
    check_exponent,
    conjugate,
    grouped_norm,
    log2_one_minus_pow2,
)

PRIMAL = "primal"
DUAL = "dual"
REL_TIE = 1e-12

EXHAUSTIVE_MAX_M = 12
EXHAUSTIVE_MAX_CAP = 8


@dataclass(frozen=True)
class LevelProfile:
    """Counts m_n of selected indices per level, stored as sorted (n, m_n) pairs."""

    counts: tuple[tuple[int, int], ...]

    def __post_init__(self):
        cleaned = tuple(sorted((int(n), int(c)) for n, c in self.counts if c))
        levels = [n for n, _ in cleaned]
        if len(set(levels)) != len(levels):
            raise DomainError("a level appears twice in the profile")
        for n, c in cleaned:
            if n < 1 or c < 0 or c > 2 ** n:
                raise DomainError(f"invalid count {c} at level {n}")
        object.__setattr__(self, "counts", cleaned)

    @classmethod
    def of(cls, counts: Mapping[int, int] | Iterable[tuple[int, int]]) -> "LevelProfile":
        items = counts.items() if isinstance(counts, Mapping) else counts
        return cls(tuple(items))

    @classmethod
    def from_vector(cls, vector: Sequence[int]) -> "LevelProfile":
        return cls(tuple((n + 1, c) for n, c in enumerate(vector)))

    @property
    def total(self) -> int:
        return sum(c for _, c in self.counts)

    @property
    def levels(self) -> tuple[int, ...]:
        return tuple(n for n, _ in self.counts)

    def as_dict(self) -> dict[int, int]:
        return dict(self.counts)

    def vector(self, length: int | None = None) -> tuple[int, ...]:
        top = max(self.levels, default=0)
        length = max(length or 0, top)
        d = self.as_dict()
        return tuple(d.get(n, 0) for n in range(1, length + 1))

    def __str__(self) -> str:
        return "{" + ", ".join(f"{n}:{c}" for n, c in self.counts) + "}"


def profile_precedes(a: LevelProfile, b: LevelProfile) -> bool:
    """Lexicographic order on padded count vectors (m_1, m_2, ...)."""
    length = max(max(a.levels, default=0), max(b.levels, default=0))
    return a.vector(length) < b.vector(length)


@dataclass(frozen=True)
class SearchConfig:
    method: str = "auto"  # auto | exhaustive | candidates
    level_cap_delta: int = 4
    deep_max: int = 200
    exhaustive_max_m: int = EXHAUSTIVE_MAX_M
    exhaustive_level_cap: int = EXHAUSTIVE_MAX_CAP
    sums: SumOptions = field(default_factory=SumOptions)

    def __post_init__(self):
        if self.method not in ("auto", "exhaustive", "candidates"):
            raise ValueError(f"unknown search method {self.method!r}")
        if self.level_cap_delta < 1 or self.deep_max < 1:
            raise ValueError("level caps must be positive")
        if self.exhaustive_max_m > EXHAUSTIVE_MAX_M or self.exhaustive_level_cap > EXHAUSTIVE_MAX_CAP:
            raise ValueError("exhaustive limits are m <= 12, level cap <= 8")

    def level_cap(self, m: int) -> int:
        """N(m) = ceil(log2 m) + delta."""
        return max(1, (m - 1).bit_length() + self.level_cap_delta)

    def exhaustive_for(self, m: int) -> bool:
        if self.method == "exhaustive":
            if m > self.exhaustive_max_m:
                raise DomainError(f"exhaustive search limited to m <= {self.exhaustive_max_m}")
            return True
        return self.method == "auto" and m <= self.exhaustive_max_m


def _exponent(p: float, kind: str) -> float:
    check_exponent(p)
    if kind == PRIMAL:
        return p
    if kind == DUAL:
        return conjugate(p)
    raise ValueError(f"unknown normalization {kind!r}")


def _log2_coeff(n: int, l: float, p: float, kind: str) -> float:
    # primal: f_k / ||f_k||_p ; dual: ||f_k||_p * f_k
    lc = NORMS.log2_norm(n, l, p)
    return -lc if kind == PRIMAL else lc


def profile_norm(profile: LevelProfile, params: SystemParams, p: float,
                 normalization: str = PRIMAL, options: SumOptions | None = None) -> NormResult:
    """Primal: ||sum f_k/||f_k||_p||_p.  Dual: ||sum ||f_k||_p f_k||_{p'}."""
    q = _exponent(p, normalization)
    groups = [LevelGroup(n, c, _log2_coeff(n, params.l, p, normalization))
              for n, c in profile.counts]
    return grouped_norm(groups, params, q, options)


# --------------------------------------------------------------------------
# exhaustive enumeration


@dataclass(frozen=True)
class Extremes:
    max_value: float
    max_profile: LevelProfile
    min_value: float
    min_profile: LevelProfile


@lru_cache(maxsize=64)
def _exhaustive(l: float, p: float, kind: str, m_max: int, cap: int,
                allowed: frozenset | None) -> dict[int, Extremes]:
    """Best and worst profile per exact total t <= m_max, levels 1..cap."""
    q = _exponent(p, kind)
    left_unit = {}
    coeff = {}
    for n in range(1, cap + 1):
        lc = _log2_coeff(n, l, p, kind)
        left_unit[n] = exp2(q * lc + 0.5 * q * log2_one_minus_pow2(n / l) + n * (q - 2.0))
        coeff[n] = exp2(lc - n / (2.0 * l))

    best: dict[int, list] = {}
    counts = [0] * cap

    def record(total, value):
        entry = best.get(total)
        if entry is None:
            prof = tuple(counts)
            best[total] = [value, prof, value, prof]
            return
        # enumeration runs in increasing lexicographic order, so only a
        # strict improvement may replace the incumbent
        if value > entry[0] * (1 + REL_TIE):
            entry[0], entry[1] = value, tuple(counts)
        if value < entry[2] * (1 - REL_TIE):
            entry[2], entry[3] = value, tuple(counts)

    def descend(n, remaining, left, values, probs):
        if n > cap:
            total = m_max - remaining
            if total == 0:
                return
            moment = left + float(np.dot(probs, np.abs(values) ** q))
            record(total, moment ** (1.0 / q))
            return
        top = min(2 ** n, remaining) if (allowed is None or n in allowed) else 0
        for c in range(top + 1):
            counts[n - 1] = c
            if c == 0:
                descend(n + 1, remaining, left, values, probs)
                continue
            gv, gp = _binomial_atoms(c)
            descend(n + 1, remaining - c, left + c * left_unit[n],
                    np.add.outer(values, coeff[n] * gv).ravel(),
                    np.multiply.outer(probs, gp).ravel())
        counts[n - 1] = 0

    descend(1, m_max, 0.0, np.zeros(1), np.ones(1))
    return {t: Extremes(e[0], LevelProfile.from_vector(e[1]), e[2], LevelProfile.from_vector(e[3]))
            for t, e in sorted(best.items())}


def brute_force_phi(m: int, params: SystemParams, p: float, level_cap: int = EXHAUSTIVE_MAX_CAP,
                    kind: str = PRIMAL, levels: frozenset | None = None) -> tuple[float, LevelProfile]:
    """Exact sup over all profiles with total <= m, levels <= level_cap."""
    if not 1 <= m <= EXHAUSTIVE_MAX_M or not 1 <= level_cap <= EXHAUSTIVE_MAX_CAP:
        raise DomainError("brute force limited to m <= 12 and level cap <= 8")
    table = _exhaustive(params.l, p, kind, EXHAUSTIVE_MAX_M, level_cap, levels)
    return _running_best(table, m)


def _running_best(table: Mapping[int, Extremes], m: int) -> tuple[float, LevelProfile]:
    value, prof = 0.0, LevelProfile(())
    for t in range(1, m + 1):
        e = table.get(t)
        if e is None:
            continue
        if e.max_value > value * (1 + REL_TIE) or (
                e.max_value >= value * (1 - REL_TIE) and profile_precedes(e.max_profile, prof)):
            value, prof = e.max_value, e.max_profile
    return value, prof


# --------------------------------------------------------------------------
# candidate family


def _fill(m: int, order: Iterable[int], ok: Callable[[int], bool]) -> dict[int, int]:
    counts = {}
    remaining = m
    for n in order:
        if remaining == 0:
            break
        if ok(n):
            take = min(2 ** n, remaining)
            counts[n] = take
            remaining -= take
    return counts


def candidate_profiles(m: int, kind: str, cap: int, deep_max: int,
                       allowed: Callable[[int], bool] | None = None,
                       exact_total: bool = False) -> list[LevelProfile]:
    """Candidate shapes of total m (or less, for single-level blocks)."""
    ok = allowed or (lambda n: True)
    shapes: list[dict[int, int]] = []
    shapes.append(_fill(m, range(1, m.bit_length() + deep_max + 1), ok))
    shapes.append(_fill(m, range(cap, 0, -1), ok))
    for n in range(1, cap + 1):
        if ok(n):
            shapes.append({n: min(m, 2 ** n)})
    if m >= 2 and m & (m - 1) == 0:
        half = m // 2
        for n1 in range(1, cap + 1):
            if 2 ** n1 < half or not ok(n1):
                continue
            for n2 in range(n1 + 1, cap + 1):
                if ok(n2):
                    shapes.append({n1: half, n2: half})
    if kind == PRIMAL:
        for n in range(cap + 1, deep_max + 1):
            if ok(n) and 2 ** n >= m:
                shapes.append({n: m})
    seen = set()
    out = []
    for s in shapes:
        prof = LevelProfile.of(s)
        if prof.total == 0 or prof in seen:
            continue
        if exact_total and prof.total != m:
            continue
        seen.add(prof)
        out.append(prof)
    return out


def _pick(scored: Sequence[tuple[NormResult, LevelProfile]], maximize: bool):
    best = None
    for res, prof in scored:
        v = float(res.log2)
        if best is None:
            best = (v, res, prof)
            continue
        bv, _, bprof = best
        tie = abs(v - bv) <= REL_TIE * max(1.0, abs(bv))
        better = (v > bv) if maximize else (v < bv)
        if (better and not tie) or (tie and profile_precedes(prof, bprof)):
            best = (v, res, prof)
    return best[1], best[2]


@dataclass(frozen=True)
class FundamentalEntry:
    m: int
    value: float
    log2: float
    profile: LevelProfile
    method: str  # exhaustive | candidate-family
    kind: str
    level_cap: int
    error_bound: float = 0.0


@dataclass
class FundamentalTable:
    kind: str
    entries: list[FundamentalEntry]

    def values(self) -> list[float]:
        return [e.value for e in self.entries]

    def __iter__(self):
        return iter(self.entries)


def phi(m: int, params: SystemParams, p: float, kind: str = PRIMAL,
        search: SearchConfig | None = None,
        levels: Callable[[int], bool] | None = None) -> FundamentalEntry:
    """phi(m) (primal) or phi*(m) (dual), as a max over the configured search space.

    ``levels`` restricts the search to a subsystem made of whole levels.
    """
    if m < 1:
        raise DomainError(f"m must be >= 1, got {m}")
    search = search or SearchConfig()
    _exponent(p, kind)
    if search.exhaustive_for(m):
        cap = search.exhaustive_level_cap
        allowed = None if levels is None else frozenset(n for n in range(1, cap + 1) if levels(n))
        table = _exhaustive(params.l, p, kind, search.exhaustive_max_m, cap, allowed)
        value, prof = _running_best(table, m)
        return FundamentalEntry(m, value, math.log2(value), prof, "exhaustive", kind, cap)
    cap = search.level_cap(m)
    cands = candidate_profiles(m, kind, cap, search.deep_max, levels)
    scored = [(profile_norm(prof, params, p, kind, search.sums), prof) for prof in cands]
    res, prof = _pick(scored, maximize=True)
    return FundamentalEntry(m, res.value, float(res.log2), prof, "candidate-family", kind, cap,
                            res.error_bound)


def phi_table(m_list: Sequence[int], params: SystemParams, p: float, kind: str = PRIMAL,
              search: SearchConfig | None = None,
              levels: Callable[[int], bool] | None = None) -> FundamentalTable:
    """phi over an increasing list of sizes.

    Because phi(m) is a sup over |P| <= m, a profile found for a smaller
    size also competes at every larger size; the table carries that max.
    """
    entries: list[FundamentalEntry] = []
    for m in sorted(m_list):
        e = phi(m, params, p, kind, search, levels)
        if entries and entries[-1].log2 > e.log2:
            prev = entries[-1]
            e = FundamentalEntry(m, prev.value, prev.log2, prev.profile, e.method, kind,
                                 e.level_cap, prev.error_bound)
        entries.append(e)
    return FundamentalTable(kind, entries)


# --------------------------------------------------------------------------
# democracy


@dataclass(frozen=True)
class DemocracyEntry:
    m: int
    max_norm: float
    min_norm: float
    ratio: float
    max_profile: LevelProfile
    min_profile: LevelProfile
    method: str


def democracy_ratio(m: int, params: SystemParams, p: float,
                    search: SearchConfig | None = None) -> DemocracyEntry:
    """max/min of the normalized-sum norm over profiles of total exactly m."""
    if m < 1:
        raise DomainError(f"m must be >= 1, got {m}")
    search = search or SearchConfig()
    check_exponent(p)
    if search.exhaustive_for(m):
        cap = search.exhaustive_level_cap
        e = _exhaustive(params.l, p, PRIMAL, search.exhaustive_max_m, cap, None)[m]
        return DemocracyEntry(m, e.max_value, e.min_value, e.max_value / e.min_value,
                              e.max_profile, e.min_profile, "exhaustive")
    cap = search.level_cap(m)
    cands = candidate_profiles(m, PRIMAL, cap, search.deep_max, exact_total=True)
    scored = [(profile_norm(prof, params, p, PRIMAL, search.sums), prof) for prof in cands]
    hi, hi_prof = _pick(scored, maximize=True)
    lo, lo_prof = _pick(scored, maximize=False)
    return DemocracyEntry(m, hi.value, lo.value, exp2(float(hi.log2) - float(lo.log2)),
                          hi_prof, lo_prof, "candidate-family")


def witness_bn(n: int, params: SystemParams, r: float, options: SumOptions | None = None) -> float:
    """Norm in L^r of the normalized sum over the whole of level n."""
    if n < 1:
        raise DomainError(f"level must be >= 1, got {n}")
    return profile_norm(LevelProfile.of({n: 2 ** n}), params, r, PRIMAL, options).value


def witness_bstar(n: int, params: SystemParams, r: float, options: SumOptions | None = None) -> float:
    """Norm in L^r of the normalized sum over 2^n indices taken at level n^2."""
    if n < 1:
        raise DomainError(f"level must be >= 1, got {n}")
    return profile_norm(LevelProfile.of({n * n: 2 ** n}), params, r, PRIMAL, options).value


@dataclass(frozen=True)
class WitnessRow:
    n: int
    bn: float
    bstar: float
    ratio: float


def witness_sequence(params: SystemParams, r: float, n_values: Iterable[int],
                     options: SumOptions | None = None) -> list[WitnessRow]:
    rows = []
    for n in n_values:
        bn = witness_bn(n, params, r, options)
        bs = witness_bstar(n, params, r, options)
        rows.append(WitnessRow(n, bn, bs, bn / bs))
    return rows


def strictly_increasing(xs: Sequence[float]) -> bool:
    return all(b > a for a, b in zip(xs, xs[1:]))


def bidemocracy_profile(m_list: Sequence[int], params: SystemParams, p: float,
                        search: SearchConfig | None = None) -> list[tuple[int, float]]:
    """(m, phi(m) phi*(m) / m) for each m."""
    if p <= 1:
        raise DomainError("bidemocracy needs p > 1")
    primal = phi_table(m_list, params, p, PRIMAL, search)
    dual = phi_table(m_list, params, p, DUAL, search)
    return [(a.m, exp2(a.log2 + b.log2) / a.m) for a, b in zip(primal, dual)]


# --------------------------------------------------------------------------
# partitions into subsystems


@dataclass(frozen=True)
class LevelRule:
    """Index class made of whole levels: n belongs iff n mod modulus is in residues."""

    modulus: int
    residues: frozenset
    name: str = ""

    def __contains__(self, n: int) -> bool:
        return n % self.modulus in self.residues

    def __call__(self, n: int) -> bool:
        return n in self


def parity_partition() -> list[LevelRule]:
    return [LevelRule(2, frozenset({1}), "odd"), LevelRule(2, frozenset({0}), "even")]


def residue_partition(nu: int) -> list[LevelRule]:
    return [LevelRule(nu, frozenset({j}), f"mod{nu}={j}") for j in range(nu)]


def check_partition(classes: Sequence[LevelRule], horizon: int) -> None:
    if not classes:
        raise DomainError("partition needs at least one class")
    period = math.lcm(*(c.modulus for c in classes))
    for n in range(1, max(horizon, period) + 1):
        owners = sum(1 for c in classes if n in c)
        if owners != 1:
            kind = "missed by" if owners == 0 else "shared by"
            raise DomainError(f"level {n} is {kind} the classes")
        # every class must be infinite: it owns some residue mod period
    for c in classes:
        if not any(n in c for n in range(1, period + 1)):
            raise DomainError(f"class {c.name or c} is empty")


@dataclass(frozen=True)
class SandwichReport:
    m: int
    nu: int
    phi: float
    class_phi: tuple[float, ...]
    phi_tilde: float
    lower_ok: bool
    upper_ok: bool

    @property
    def holds(self) -> bool:
        return self.lower_ok and self.upper_ok


def partition_sandwich(classes: Sequence[LevelRule], m: int, params: SystemParams, p: float,
                       search: SearchConfig | None = None) -> SandwichReport:
    """Check phi(m)/nu <= max_j phi_{X_j}(m) <= phi(m) on computed data.

    In candidate mode the full system is scored on the union of its own
    family and every class family, so the searched space for X contains
    the searched space of each X_j, as the index sets themselves do.
    """
    search = search or SearchConfig()
    check_partition(classes, max(search.deep_max, search.exhaustive_level_cap))
    per_class = [phi(m, params, p, PRIMAL, search, levels=c) for c in classes]
    full = phi(m, params, p, PRIMAL, search)
    full_log2 = max([full.log2] + [e.log2 for e in per_class])
    tilde_log2 = max(e.log2 for e in per_class)
    nu = len(classes)
    slack = REL_TIE * max(1.0, abs(full_log2))
    lower = full_log2 - math.log2(nu) <= tilde_log2 + slack
    upper = tilde_log2 <= full_log2 + slack
    return SandwichReport(m, nu, exp2(full_log2), tuple(e.value for e in per_class),
                          exp2(tilde_log2), lower, upper)
