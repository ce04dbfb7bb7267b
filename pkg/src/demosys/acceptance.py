"""Exit criteria for a build, runnable from pytest or ``demosys verify``.

Each check returns a :class:`Criterion` with the measured quantity in
``detail``; tolerances are fixed constants below.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import oracles
from .artifacts import render_csv
from .fundamental import (
    DUAL,
    PRIMAL,
    LevelProfile,
    SearchConfig,
    brute_force_phi,
    parity_partition,
    partition_sandwich,
    phi,
    phi_table,
    profile_norm,
    strictly_increasing,
)
from .indexing import level_boundary, to_flat
from .rademacher import WeightedLevelGroup, rademacher_sum_norm
from .regimes import DEFAULT_M_GRID, REGIME_COLUMNS, log_fit, norm_product_slope, regime_map, row_dict
from .system import SystemParams, inner_product, single_norm

ORTHO_TOL = 1e-10
ORACLE_RTOL = 1e-10
SLOPE_TOL = 0.05
PRODUCT_SLOPE_TOL = 0.02
SEARCH_RTOL = 0.1


@dataclass(frozen=True)
class Criterion:
    number: int
    title: str
    passed: bool
    detail: str

    def line(self) -> str:
        mark = "PASS" if self.passed else "FAIL"
        return f"[{mark}] {self.number:2d}. {self.title}: {self.detail}"


def _rel(a: float, b: float) -> float:
    return abs(a - b) / max(abs(b), 1e-300)


def c01_orthonormality() -> Criterion:
    kmax = level_boundary(8)
    worst = 0.0
    for l in (0.5, 1.0, 2.0, 4.0):
        params = SystemParams(l)
        for k in range(1, kmax + 1):
            for m in range(1, kmax + 1):
                worst = max(worst, abs(inner_product(k, m, params) - (k == m)))
    worst_oracle = 0.0
    for l in (0.5, 1.0, 2.0, 4.0):
        params = SystemParams(l)
        for k in range(1, 31):
            for m in range(1, 31):
                worst_oracle = max(worst_oracle,
                                   abs(oracles.inner_product(k, m, params) - inner_product(k, m, params)))
    ok = worst <= ORTHO_TOL and worst_oracle <= ORTHO_TOL
    return Criterion(1, "orthonormality", ok,
                     f"max |<f_k,f_m> - delta| = {worst:.3g} (k,m <= {kmax}); "
                     f"oracle gap {worst_oracle:.3g} (k,m <= 30)")


def c02_single_norm() -> Criterion:
    worst = 0.0
    for l in (0.5, 1.0, 2.0):
        params = SystemParams(l)
        for p in (1.0, 1.5, 2.0, 2.5, 4.0, 7.0):
            for n in range(1, 11):
                for j in (1, 2 ** n):
                    ref = oracles.norm_pow([(to_flat(n, j), 1.0)], params, p) ** (1 / p)
                    worst = max(worst, _rel(single_norm(n, params, p), ref))
    return Criterion(2, "closed-form single norms vs oracle", worst <= ORACLE_RTOL,
                     f"max rel err {worst:.3g} (tol {ORACLE_RTOL:g})")


def c03_rademacher() -> Criterion:
    rng = np.random.default_rng(20240603)
    worst = 0.0
    methods = set()
    for n in range(1, 15):
        coeffs = rng.uniform(-2.0, 2.0, size=n)
        for p in (1.0, 2.0, 3.0, 4.0, 7.5):
            res = rademacher_sum_norm([WeightedLevelGroup.of(a, 1) for a in coeffs], p)
            methods.add(res.method)
            ref = oracles.enumerated_moment(coeffs, p)
            worst = max(worst, _rel(res.value ** p, ref))
    ok = worst <= ORACLE_RTOL and methods == {"exact"}
    return Criterion(3, "sign-sum moments vs enumeration", ok,
                     f"max rel err {worst:.3g}, methods {sorted(methods)}")


def _phi_slope(l: float, p: float, search: SearchConfig | None = None) -> float:
    table = phi_table(DEFAULT_M_GRID, SystemParams(l), p, PRIMAL, search)
    return log_fit([e.m for e in table], [e.log2 for e in table]).slope


def _slope_criterion(number, title, l, p, target) -> Criterion:
    slope = _phi_slope(l, p)
    return Criterion(number, title, abs(slope - target) <= SLOPE_TOL,
                     f"fitted exponent {slope:.4f}, target {target:.4f} +/- {SLOPE_TOL}")


def c04_phi_exponent_p() -> Criterion:
    return _slope_criterion(4, "phi ~ m^(1/p) at (l,p)=(1,4)", 1.0, 4.0, 0.25)


def c05_phi_exponent_r_small_l() -> Criterion:
    return _slope_criterion(5, "phi ~ m^(1/r) at (l,r)=(1,1.5)", 1.0, 1.5, 1 / 1.5)


def c06_phi_exponent_sqrt() -> Criterion:
    return _slope_criterion(6, "phi ~ m^(1/2) at (l,r)=(4,1.5)", 4.0, 1.5, 0.5)


def c07_witness() -> Criterion:
    params = SystemParams(2.0)
    ratios, methods = [], set()
    for n in range(2, 13):
        bn = profile_norm(LevelProfile.of({n: 2 ** n}), params, 1.5)
        bs = profile_norm(LevelProfile.of({n * n: 2 ** n}), params, 1.5)
        methods.update((bn.method, bs.method))
        ratios.append(2.0 ** (bn.log2 - bs.log2))
    ok = strictly_increasing(ratios) and methods == {"exact"}
    return Criterion(7, "whole-level / deep-level witness ratio increasing at (l,r)=(2,1.5)", ok,
                     f"ratios n=2..12: {ratios[0]:.4f} .. {ratios[-1]:.4f}, methods {sorted(methods)}")


def c08_bidemocracy() -> Criterion:
    slopes = {}
    for l in (1.0, 0.5):
        params = SystemParams(l)
        primal = phi_table(DEFAULT_M_GRID, params, 4.0, PRIMAL)
        dual = phi_table(DEFAULT_M_GRID, params, 4.0, DUAL)
        ms = [e.m for e in primal]
        log2_prod = [a.log2 + b.log2 - math.log2(a.m) for a, b in zip(primal, dual)]
        slopes[l] = log_fit(ms, log2_prod).slope
    ok = all(abs(s) <= SLOPE_TOL for s in slopes.values())
    return Criterion(8, "phi*phi_dual/m flat for l <= b1 (p=4)", ok,
                     ", ".join(f"l={l}: slope {s:.4f}" for l, s in slopes.items()))


def c09_norm_product() -> Criterion:
    fit = norm_product_slope(SystemParams(4.0), 4.0)
    target = (4.0 - 2.0) / 4.0 - 1.0 / (2 * 4.0)
    ok = fit.slope > 0 and abs(fit.slope - target) <= PRODUCT_SLOPE_TOL
    return Criterion(9, "norm-product divergence at (l,p)=(4,4)", ok,
                     f"slope {fit.slope:.4f}, target {target:.4f} +/- {PRODUCT_SLOPE_TOL}")


def c10_search_vs_brute_force() -> Criterion:
    worst = 0.0
    cand = SearchConfig(method="candidates")
    for l, p in ((1.0, 4.0), (2.0, 1.5), (4.0, 1.5)):
        params = SystemParams(l)
        for m in range(1, 13):
            ref, _ = brute_force_phi(m, params, p, level_cap=8)
            got = phi(m, params, p, PRIMAL, cand).value
            worst = max(worst, _rel(got, ref))
    return Criterion(10, "candidate family vs exhaustive phi (m <= 12)", worst <= SEARCH_RTOL,
                     f"max rel gap {worst:.4f} (tol {SEARCH_RTOL})")


def c11_sandwich() -> Criterion:
    params = SystemParams(1.0)
    failures = [m for m in range(1, 2 ** 8 + 1)
                if not partition_sandwich(parity_partition(), m, params, 4.0).holds]
    return Criterion(11, "partition sandwich, odd/even levels, m <= 256", not failures,
                     "holds at every m" if not failures else f"fails at m = {failures[:10]}")


def determinism_csv() -> str:
    rows = regime_map((1.0, 4.0), (4.0,))
    return render_csv(REGIME_COLUMNS, [row_dict(r) for r in rows], {"l_grid": [1.0, 4.0], "p_grid": [4.0]})


def c12_determinism() -> Criterion:
    a = determinism_csv().encode()
    b = determinism_csv().encode()
    return Criterion(12, "regime-map CSV byte-identical across runs", a == b,
                     f"{len(a)} bytes, identical={a == b}")


CRITERIA: tuple[Callable[[], Criterion], ...] = (
    c01_orthonormality, c02_single_norm, c03_rademacher, c04_phi_exponent_p,
    c05_phi_exponent_r_small_l, c06_phi_exponent_sqrt, c07_witness, c08_bidemocracy,
    c09_norm_product, c10_search_vs_brute_force, c11_sandwich, c12_determinism,
)


def run_all(echo: Callable[[str], None] | None = None) -> list[Criterion]:
    results = []
    for check in CRITERIA:
        res = check()
        if echo:
            echo(res.line())
        results.append(res)
    return results
