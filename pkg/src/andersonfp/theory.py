"""Convergence-factor bound w0, its checkers, and the r-factor estimator."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

GRID_POINTS = 10001
GOLDEN_TOL = 1e-12
_INVPHI = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class SpectrumSummary:
    lambda_min: float
    lambda_max: float
    op_norm: float
    w0: float
    rate_bound: float

    @property
    def pair_bound(self) -> float:
        """Bound w0 * ||W|| on the two-step residual contraction."""
        return self.w0 * self.op_norm

    @classmethod
    def from_extremes(cls, lambda_min: float, lambda_max: float) -> SpectrumSummary:
        op_norm = max(abs(lambda_min), abs(lambda_max))
        w0 = compute_w0(lambda_min, lambda_max)
        return cls(lambda_min, lambda_max, op_norm, w0, math.sqrt(w0 * op_norm))


def _check_spectrum(lambda_min: float, lambda_max: float) -> None:
    if not (-1.0 < lambda_min <= lambda_max < 1.0):
        raise ValueError(f"bad spectrum: need -1 < {lambda_min} <= {lambda_max} < 1")


def w0_objective(a: float, lambda_min: float, lambda_max: float) -> float:
    """Sine of the angle bound at P with |PR| = 1/a; ``a = inf`` gives the limit."""
    _check_spectrum(lambda_min, lambda_max)
    spread = abs(lambda_max - lambda_min)
    s = lambda_max + lambda_min
    if math.isinf(a):
        return math.sin(math.asin(min(1.0, spread / (2.0 - s))))
    ratio = spread * a / math.sqrt(4.0 + (2.0 - s) ** 2 * a * a)
    angle = math.asin(min(1.0, max(-1.0, ratio)))
    return math.sin(angle + abs(math.atan(a) - math.atan((1.0 - s / 2.0) * a)))


def _objective_theta(theta: np.ndarray, lambda_min: float, lambda_max: float) -> np.ndarray:
    """The w0 objective in the variable theta = atan(a), vectorised, theta in [0, pi/2]."""
    theta = np.asarray(theta, dtype=float)
    spread = abs(lambda_max - lambda_min)
    s = lambda_max + lambda_min
    c = 1.0 - s / 2.0
    sin_t, cos_t = np.sin(theta), np.cos(theta)
    # a / sqrt(4 + (2-s)^2 a^2) with a = tan(theta), multiplied through by cos(theta)
    ratio = spread * sin_t / np.sqrt(4.0 * cos_t**2 + (2.0 - s) ** 2 * sin_t**2)
    # atan(a) - atan(c a) through the tangent subtraction formula, exact when s = 0
    second = np.arctan2(abs(s / 2.0) * sin_t * cos_t, cos_t**2 + c * sin_t**2)
    return np.sin(np.arcsin(np.clip(ratio, -1.0, 1.0)) + second)


def _golden_max(f, lo: float, hi: float, tol: float = GOLDEN_TOL) -> tuple[float, float]:
    c = hi - _INVPHI * (hi - lo)
    d = lo + _INVPHI * (hi - lo)
    fc, fd = f(c), f(d)
    while hi - lo > tol:
        if fc >= fd:
            hi, d, fd = d, c, fc
            c = hi - _INVPHI * (hi - lo)
            fc = f(c)
        else:
            lo, c, fc = c, d, fd
            d = lo + _INVPHI * (hi - lo)
            fd = f(d)
    x = 0.5 * (lo + hi)
    return x, f(x)


def compute_w0(lambda_min: float, lambda_max: float) -> float:
    """Supremum over a >= 0 of :func:`w0_objective`.

    Grid search over theta = atan(a) in [0, pi/2] followed by golden-section
    refinement in the two cells around the best grid point.
    """
    _check_spectrum(lambda_min, lambda_max)
    theta = np.linspace(0.0, math.pi / 2.0, GRID_POINTS)
    vals = _objective_theta(theta, lambda_min, lambda_max)
    # the cos(theta) factorisation above is exact at pi/2, but use the closed-form limit
    vals[-1] = w0_objective(math.inf, lambda_min, lambda_max)
    i = int(np.argmax(vals))
    best = float(vals[i])
    lo = theta[max(i - 1, 0)]
    hi = theta[min(i + 1, GRID_POINTS - 1)]

    def f(t):
        return float(_objective_theta(t, lambda_min, lambda_max))

    _, refined = _golden_max(f, lo, hi)
    return max(best, refined)


def scalar_w0(w: float) -> float:
    """w0 for a scalar operator w*I: w / (2 - w)."""
    return w / (2.0 - w)


def make_tight_init_scalar(w: float):
    """Residual pair (xtilde0, xtilde1) in R^2 that makes the AA(1) pair bound tight for W = w I.

    xtilde1 = (0, 1) and xtilde0 = xtilde1 + (sin phi, -cos phi) with
    sin phi = 1/sqrt(2 - w), so the foot of the perpendicular from the origin
    onto the line through the pair has the extremal angle from the first step on.
    """
    if not 0.0 < w < 1.0:
        raise ValueError("w must lie in (0, 1)")
    sin_phi = 1.0 / math.sqrt(2.0 - w)
    cos_phi = math.sqrt((1.0 - w) / (2.0 - w))
    xtilde1 = np.array([0.0, 1.0])
    xtilde0 = xtilde1 + np.array([sin_phi, -cos_phi])
    return xtilde0, xtilde1


def spectrum_of(W) -> SpectrumSummary:
    W = np.asarray(W, dtype=float)
    if np.linalg.norm(W - W.T) > 1e-12 * max(1.0, np.linalg.norm(W)):
        raise ValueError("not symmetric")
    evals = np.linalg.eigvalsh(W)
    return SpectrumSummary.from_extremes(float(evals[0]), float(evals[-1]))


@dataclass(frozen=True)
class PairRow:
    k: int
    lhs: float
    rhs: float
    satisfied: bool
    floor: bool


PAIR_SLACK = 1e-9
FLOOR_FACTOR = 1e2


def check_pairwise_bound(trace, W, a=None) -> list[PairRow]:
    """Compare ||(W-I)(x^(k+1)-x*)|| / ||(W-I)(x^(k-1)-x*)|| with w0 ||W|| for k >= 2.

    Rows whose denominator is at the rounding floor (below
    1e2 * eps * ||(W-I) x^(1)||) are marked ``floor`` and count as satisfied.
    """
    W = np.asarray(W, dtype=float)
    n = W.shape[0]
    a = np.zeros(n) if a is None else np.asarray(a, dtype=float)
    IW = np.eye(n) - W
    if np.linalg.cond(IW) > 1.0 / np.finfo(float).eps:
        raise ValueError("not contractive: I - W is singular")
    x_star = np.linalg.solve(IW, a)
    rhs = spectrum_of(W).pair_bound
    X = trace.iterates if hasattr(trace, "iterates") else np.asarray(trace)
    xt = np.linalg.norm((X - x_star) @ IW, axis=1)  # IW is symmetric
    floor = FLOOR_FACTOR * np.finfo(float).eps * (xt[1] if len(xt) > 1 else xt[0])
    rows = []
    for k in range(2, len(xt) - 1):
        den = xt[k - 1]
        if den <= floor:
            rows.append(PairRow(k, math.nan, rhs, True, True))
            continue
        lhs = float(xt[k + 1] / den)
        rows.append(PairRow(k, lhs, rhs, lhs <= rhs * (1.0 + PAIR_SLACK), False))
    return rows


def check_ratio_bound(residual_norms, bound: float, start_below: float = 1e-4,
                      slack: float = 1.05, floor: float = 0.0) -> list[PairRow]:
    """Two-step ratios ||r_(k+1)|| / ||r_(k-1)|| once the residual has first dropped below ``start_below``.

    Used for the local bound of modified AA on nonlinear problems.
    """
    r = np.asarray(residual_norms, dtype=float)
    below = np.nonzero(r < start_below)[0]
    rows = []
    if below.size == 0:
        return rows
    for k in range(max(int(below[0]) + 1, 1), len(r) - 1):
        if r[k - 1] <= floor:
            rows.append(PairRow(k, math.nan, bound, True, True))
            continue
        lhs = float(r[k + 1] / r[k - 1])
        rows.append(PairRow(k, lhs, bound, lhs <= bound * slack, False))
    return rows


def estimate_r_factor(error_norms, start: int = 1) -> np.ndarray:
    """r_est(k) = max_{n >= k} ||e_n||^(1/n), entry i of the input being n = start + i.

    Zero errors are replaced by the smallest normal double before the root.
    """
    e = np.asarray(error_norms, dtype=float)
    if e.size == 0:
        raise ValueError("need at least one error norm")
    if start < 1:
        raise ValueError("start must be >= 1 (the root index)")
    e = np.maximum(e, np.finfo(float).tiny)
    roots = e ** (1.0 / np.arange(start, start + e.size))
    return np.maximum.accumulate(roots[::-1])[::-1]
