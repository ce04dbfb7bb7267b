"""Brute-force reference computations.

Nothing here uses the closed forms: left halves are integrated cell by
cell from pointwise evaluation, right halves by enumerating every sign
vector.  Cost is exponential in the number of terms; keep it to <= 14.
"""

from __future__ import annotations

import itertools
from fractions import Fraction
from typing import Sequence

import numpy as np

from .indexing import support_interval, to_level
from .rademacher import rademacher_eval
from .system import SystemParams, eval_f

MAX_TERMS = 14


def sign_matrix(n: int) -> np.ndarray:
    """All 2^n sign vectors as rows."""
    if n > MAX_TERMS + 6:
        raise ValueError("too many signs to enumerate")
    return np.array(list(itertools.product((1.0, -1.0), repeat=n))).reshape(-1, n)


def enumerated_moment(coefficients: Sequence[float], p: float) -> float:
    """2^{-n} sum over sign vectors of |sum a_k eps_k|^p."""
    a = np.asarray(coefficients, dtype=float)
    if a.size == 0:
        return 0.0
    sums = sign_matrix(a.size) @ a
    return float(np.mean(np.abs(sums) ** p))


def _left_cells(ks: Sequence[int]):
    """Elementary cells of [-1, 0) cut at every support endpoint."""
    cuts = {Fraction(-1), Fraction(0)}
    for k in ks:
        pos = to_level(k)
        iv = support_interval(pos.n, pos.j)
        cuts.update((iv.left, iv.right))
    pts = sorted(cuts)
    return list(zip(pts, pts[1:]))


def left_integral(terms: Sequence[tuple[int, float]], params: SystemParams, p: float) -> float:
    """int_{-1}^{0} |sum c_k f_k|^p by evaluating at each cell midpoint."""
    total = 0.0
    for a, b in _left_cells([k for k, _ in terms]):
        mid = float((a + b) / 2)
        v = sum(c * eval_f(k, mid, params) for k, c in terms)
        total += abs(v) ** p * float(b - a)
    return total


def right_amplitude(k: int, params: SystemParams) -> float:
    # r_k(0) = +1, so the right branch at 0 is the amplitude itself
    return eval_f(k, 0.0, params)


def norm_pow(terms: Sequence[tuple[int, float]], params: SystemParams, p: float) -> float:
    """||sum c_k f_k||_p^p on [-1, 1]."""
    if len(terms) > MAX_TERMS:
        raise ValueError(f"oracle limited to {MAX_TERMS} terms")
    right = enumerated_moment([c * right_amplitude(k, params) for k, c in terms], p)
    return left_integral(terms, params, p) + right


def inner_product(k: int, m: int, params: SystemParams) -> float:
    """<f_k, f_m> by cell integration on the left and bit enumeration on the right.

    Uniform t on [0, 1] has independent fair binary digits, so averaging
    r_k r_m over the four settings of digits k and m is exact.
    """
    left = 0.0
    for a, b in _left_cells([k, m]):
        mid = float((a + b) / 2)
        left += eval_f(k, mid, params) * eval_f(m, mid, params) * float(b - a)
    digits = sorted({k, m})
    if digits[-1] > 50:
        raise ValueError("bit enumeration needs indices <= 50")
    acc = 0.0
    for bits in itertools.product((0, 1), repeat=len(digits)):
        t = sum(Fraction(b, 2 ** d) for b, d in zip(bits, digits)) + Fraction(1, 2 ** (digits[-1] + 2))
        acc += rademacher_eval(k, float(t)) * rademacher_eval(m, float(t))
    right = acc / 2 ** len(digits) * right_amplitude(k, params) * right_amplitude(m, params)
    return left + right
