"""Derived constants, the (l, p) regime classifier and the regime-map driver."""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .fundamental import (
    PRIMAL,
    SearchConfig,
    phi_table,
    strictly_increasing,
    witness_sequence,
)
from .system import NORMS, DomainError, SystemParams, conjugate, log2_norm_product

BIDEMOCRATIC = "bidemocratic-both"
DEMOCRATIC_P_ONLY = "democratic-p-only-nonbidemocratic"
NONDEMOCRATIC_DUAL = "nondemocratic-dual"
SQRT_DUAL = "democratic-dual-sqrt-nonbidemocratic"
BOUNDARY = "boundary"
LABELS = (BIDEMOCRATIC, DEMOCRATIC_P_ONLY, NONDEMOCRATIC_DUAL, SQRT_DUAL, BOUNDARY)

EXPONENT_TOL = 0.05
DEFAULT_M_GRID = tuple(2 ** s for s in range(4, 13))
PRODUCT_LEVELS = tuple(range(5, 41))
WITNESS_LEVELS = tuple(range(2, 13))
_BOUNDARY_RTOL = 1e-12


@dataclass(frozen=True)
class RegimeConstants:
    p: float
    r: float
    l: float
    kappa: float
    omega: float
    omega1: float
    n0: int
    n1: int | None
    b1: float
    b2: float


def boundaries(p: float) -> tuple[float, float]:
    """(p/(2(p-2)), p/(p-2)); equal to (r/(2(2-r)), r/(2-r)) with r = p'."""
    if p <= 2:
        raise DomainError(f"regime boundaries need p > 2, got {p}")
    return p / (2.0 * (p - 2.0)), p / (p - 2.0)


def least_n1(l: float, r: float, n_max: int = 100_000) -> int | None:
    """Least n with |c_{n,l}|^r >= 2^{n(r-2)} / 2 in L^r, or None up to n_max."""
    for n in range(1, n_max + 1):
        if NORMS.log2_pow(n, l, r) >= n * (r - 2.0) - 1.0:
            return n
    return None


def derived_constants(params: SystemParams, p: float) -> RegimeConstants:
    b1, b2 = boundaries(p)
    l = params.l
    r = conjugate(p)
    omega = r / (2.0 * l) + r - 1.0
    return RegimeConstants(
        p=p, r=r, l=l,
        kappa=4.0 / p - 1.0 - 1.0 / l,
        omega=omega,
        omega1=omega - 1.0,
        n0=math.floor(l) + 1,
        n1=least_n1(l, r),
        b1=b1, b2=b2,
    )


def _close(a: float, b: float) -> bool:
    return abs(a - b) <= _BOUNDARY_RTOL * max(abs(a), abs(b))


def classify(params: SystemParams, p: float) -> str:
    b1, b2 = boundaries(p)
    l = params.l
    if l <= b1 or _close(l, b1):
        return BIDEMOCRATIC
    if _close(l, b2):
        return BOUNDARY
    if l < b2:
        return NONDEMOCRATIC_DUAL
    return SQRT_DUAL


def kappa_partial_sum_ok(kappa: float, nus: Sequence[int]) -> bool:
    """For kappa < 0: sum_{n=1}^{nu} 2^{kappa n} <= 2^kappa / (1 - 2^kappa) on every nu."""
    if kappa >= 0:
        raise DomainError("bound applies to kappa < 0 only")
    cap = 2.0 ** kappa / (1.0 - 2.0 ** kappa)
    return all(math.fsum(2.0 ** (kappa * n) for n in range(1, nu + 1)) <= cap * (1 + 1e-15)
               for nu in nus)


@dataclass(frozen=True)
class Fit:
    slope: float
    intercept: float
    residual: float


def fit_exponent(samples: Sequence[tuple[float, float]]) -> Fit:
    """Least-squares slope of log(value) against log(m); residual is the RMS misfit."""
    if len(samples) < 4:
        raise ValueError("need at least 4 samples")
    m = np.array([s[0] for s in samples], dtype=float)
    v = np.array([s[1] for s in samples], dtype=float)
    if np.any(v <= 0) or np.any(m <= 0):
        raise ValueError("samples must be positive")
    return _line(np.log(m), np.log(v))


def _line(x: np.ndarray, y: np.ndarray) -> Fit:
    A = np.vstack([x, np.ones_like(x)]).T
    (slope, intercept), *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = y - (slope * x + intercept)
    return Fit(float(slope), float(intercept), float(np.sqrt(np.mean(resid ** 2))))


def log_fit(m_values: Sequence[int], log2_values: Sequence[float]) -> Fit:
    """fit_exponent on log2-stored values (no overflow for deep levels)."""
    if len(m_values) < 4:
        raise ValueError("need at least 4 samples")
    x = np.log(np.asarray(m_values, dtype=float))
    y = np.asarray(log2_values, dtype=float) * math.log(2.0)
    return _line(x, y)


def norm_product_slope(params: SystemParams, p: float, levels: Sequence[int] = PRODUCT_LEVELS) -> Fit:
    """Slope of log2(||f_k||_p ||f_k||_p') against the level n of k."""
    n = np.asarray(levels, dtype=float)
    y = np.array([log2_norm_product(int(k), params.l, p) for k in levels])
    return _line(n, y)


def theoretical_product_slope(params: SystemParams, p: float) -> float:
    """Asymptotic slope (p-2)/p - 1/(2l) above the first boundary, else 0."""
    b1, _ = boundaries(p)
    if params.l <= b1:
        return 0.0
    return (p - 2.0) / p - 1.0 / (2.0 * params.l)


@dataclass(frozen=True)
class RegimeRow:
    l: float
    p: float
    alpha_p: float
    alpha_p_residual: float
    alpha_pprime: float
    alpha_pprime_residual: float
    product_slope: float
    witness_monotone: int
    theory_label: str
    agree: int
    note: str = ""


REGIME_COLUMNS = ("l", "p", "alpha_p", "alpha_p_residual", "alpha_pprime",
                  "alpha_pprime_residual", "product_slope", "witness_monotone",
                  "theory_label", "agree")


def row_dict(row: RegimeRow) -> dict:
    return {name: getattr(row, name) for name in REGIME_COLUMNS + ("note",)}


def regime_cell(l: float, p: float, m_grid: Sequence[int] = DEFAULT_M_GRID,
                search: SearchConfig | None = None) -> RegimeRow:
    params = SystemParams(l)
    search = search or SearchConfig()
    r = conjugate(p)
    label = classify(params, p)

    primal = phi_table(m_grid, params, p, PRIMAL, search)
    dual_range = phi_table(m_grid, params, r, PRIMAL, search)
    fit_p = log_fit([e.m for e in primal], [e.log2 for e in primal])
    fit_r = log_fit([e.m for e in dual_range], [e.log2 for e in dual_range])
    product = norm_product_slope(params, p)
    ratios = [w.ratio for w in witness_sequence(params, r, WITNESS_LEVELS, search.sums)]
    monotone = strictly_increasing(ratios)

    alpha_p_ok = abs(fit_p.slope - 1.0 / p) <= EXPONENT_TOL
    if label == BIDEMOCRATIC:
        checks = [alpha_p_ok,
                  abs(fit_r.slope - 1.0 / r) <= EXPONENT_TOL,
                  product.slope <= EXPONENT_TOL]
    elif label == NONDEMOCRATIC_DUAL:
        checks = [monotone, product.slope > 0]
    else:  # SQRT_DUAL, BOUNDARY
        checks = [abs(fit_r.slope - 0.5) <= EXPONENT_TOL, product.slope > 0]
    note = ""
    if label != BIDEMOCRATIC and not alpha_p_ok:
        # phi(m)^p ~ m + C(l) with C(l) growing in l; the m^{1/p} slope
        # shows only once m >> C(l)
        note = "alpha_p pre-asymptotic on this m-grid"
    return RegimeRow(l, p, fit_p.slope, fit_p.residual, fit_r.slope, fit_r.residual,
                     product.slope, int(monotone), label, int(all(checks)), note)


def _cell_job(args):
    l, p, m_grid, search = args
    try:
        return regime_cell(l, p, m_grid, search)
    except Exception as exc:  # recorded in the table, never fatal for the sweep
        nan = float("nan")
        label = classify(SystemParams(l), p) if p > 2 and l > 0 else ""
        return RegimeRow(l, p, nan, nan, nan, nan, nan, 0, label, 0,
                         note=f"{type(exc).__name__}: {exc}")


def regime_map(l_grid: Sequence[float], p_grid: Sequence[float],
               m_grid: Sequence[int] = DEFAULT_M_GRID, search: SearchConfig | None = None,
               workers: int = 1) -> list[RegimeRow]:
    """One row per (l, p), ordered by p then l regardless of scheduling."""
    if not l_grid or not p_grid:
        raise DomainError("grids must be nonempty")
    if any(p <= 2 for p in p_grid):
        raise DomainError("regime map needs p > 2")
    search = search or SearchConfig()
    jobs = [(float(l), float(p), tuple(m_grid), search) for p in p_grid for l in l_grid]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(_cell_job, jobs))
    return [_cell_job(j) for j in jobs]
