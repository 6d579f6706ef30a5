"""Fixed-point iteration and Anderson acceleration AA(m).

The AA subproblem is

    min || sum_j alpha_j f_j ||_2   s.t.  sum_j alpha_j = 1  (and |alpha_j| <= C0)

over the last m+1 residuals f_j = q(x_j) - x_j. The sum constraint is removed
by writing alpha = e_last + D gamma, where the columns of D are e_j - e_last;
the remaining least-squares problem is solved by a truncated SVD. The box
constrained ("modified") variant enumerates active sets, which is exact and
cheap for the small windows used here.
"""

from __future__ import annotations

import itertools
import math
from collections import deque
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

CONVERGED = "converged"
MAX_ITERATIONS = "max_iterations"
STAGNATED = "stagnated"

# stagnation: no relative 1e-3 improvement of the best residual for this many
# iterations, counted once the best residual is below 1e3 * residual_tol
STAGNATION_WINDOW = 50
STAGNATION_IMPROVEMENT = 1e-3
STAGNATION_ONSET = 1e3


class Diverged(FloatingPointError):
    """The operator produced a non-finite value."""

    def __init__(self, message: str, last_iterate: np.ndarray | None = None):
        super().__init__(message)
        self.last_iterate = last_iterate


class Infeasible(ValueError):
    pass


@dataclass(frozen=True)
class FixedPointOperator:
    """A map R^n -> R^n; solvers only ever call ``evaluate``."""

    dimension: int
    evaluate: Callable[[np.ndarray], np.ndarray]

    def __call__(self, x):
        return self.evaluate(x)


@dataclass(frozen=True)
class AAConfig:
    m: int = 1
    c0: float = math.inf
    beta: float = 1.0
    residual_tol: float = 1e-12
    max_iterations: int = 10_000
    svd_cutoff: float = 1e-12

    def __post_init__(self):
        if self.m < 1:
            raise ValueError("depth m must be >= 1")
        if not self.c0 > 0:
            raise ValueError("coefficient bound c0 must be positive")
        if not 0.0 <= self.beta <= 1.0:
            raise ValueError("damping beta must lie in [0, 1]")
        if not self.residual_tol > 0:
            raise ValueError("residual_tol must be positive")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if not 0.0 < self.svd_cutoff < 1.0:
            raise ValueError("svd_cutoff must lie in (0, 1)")

    @classmethod
    def modified(cls, m: int, c0: float = 1e4, **kwargs) -> AAConfig:
        return cls(m=m, c0=c0, **kwargs)

    @property
    def bounded(self) -> bool:
        return math.isfinite(self.c0)


class AAHistory:
    """Sliding window of the last m+1 iterates, their images and residuals."""

    def __init__(self, m: int):
        self.m = m
        self.iterates: deque = deque(maxlen=m + 1)
        self.images: deque = deque(maxlen=m + 1)
        self.residuals: deque = deque(maxlen=m + 1)

    def push(self, x: np.ndarray, qx: np.ndarray, f: np.ndarray | None = None) -> None:
        self.iterates.append(x)
        self.images.append(qx)
        self.residuals.append(qx - x if f is None else f)

    def __len__(self) -> int:
        return len(self.iterates)


@dataclass
class IterationRecord:
    k: int
    x: np.ndarray
    residual_norm: float
    coefficients: np.ndarray = field(default_factory=lambda: np.empty(0))
    objective: float = math.nan


@dataclass
class SolveTrace:
    """Per-iteration records of a solver run.

    ``records[k].coefficients`` are the combination weights computed at
    iteration k (used to form x^(k+1)); they are empty for plain steps and for
    the final record.
    """

    records: list[IterationRecord] = field(default_factory=list)
    reason: str | None = None

    @property
    def iterations(self) -> int:
        return self.records[-1].k

    @property
    def iterates(self) -> np.ndarray:
        return np.array([r.x for r in self.records])

    @property
    def residual_norms(self) -> np.ndarray:
        return np.array([r.residual_norm for r in self.records])

    @property
    def final(self) -> IterationRecord:
        return self.records[-1]

    def __len__(self) -> int:
        return len(self.records)


def _affine_lstsq(F: np.ndarray, offset: np.ndarray, total: float, cutoff: float):
    """min ||offset + F beta|| subject to sum(beta) == total, minimum-norm in the free directions."""
    f_last = F[:, -1]
    base = offset + total * f_last
    if F.shape[1] == 1:
        return np.array([total])
    D = F[:, :-1] - f_last[:, None]
    U, s, Vt = np.linalg.svd(D, full_matrices=False)
    if s.size == 0 or s[0] == 0.0:
        gamma = np.zeros(D.shape[1])
    else:
        keep = s > cutoff * s[0]
        gamma = Vt[keep].T @ ((U[:, keep].T @ -base) / s[keep])
    return np.append(gamma, total - math.fsum(gamma))


def _box_lstsq(F: np.ndarray, c0: float, cutoff: float):
    """Active-set enumeration for the coefficient-bounded subproblem.

    Each coefficient is free (0), at -c0 (1) or at +c0 (2); patterns are
    visited in lexicographic order and only a strictly better objective
    replaces the incumbent.
    """
    L = F.shape[1]
    best, best_obj = None, math.inf
    for pattern in itertools.product(range(3), repeat=L):
        fixed = np.array([0.0 if s == 0 else (-c0 if s == 1 else c0) for s in pattern])
        free = [j for j, s in enumerate(pattern) if s == 0]
        total = 1.0 - math.fsum(fixed)
        alpha = fixed.copy()
        if not free:
            if abs(total) > 1e-12:
                continue
        else:
            beta = _affine_lstsq(F[:, free], F @ fixed, total, cutoff)
            if np.any(np.abs(beta) > c0):
                continue
            alpha[free] = beta
        obj = float(np.linalg.norm(F @ alpha))
        if obj < best_obj:
            best, best_obj = alpha, obj
    return best


def aa_solve_subproblem(residuals, c0: float = math.inf, svd_cutoff: float = 1e-12):
    """Sum-to-one least-squares combination of residuals.

    Returns ``(alpha, objective)`` with objective ``||sum alpha_j f_j||``.
    An all-zero window returns the unit vector on the newest residual.

    Raises:
        Infeasible: ``c0`` is finite and smaller than 1/len(residuals).
    """
    F = np.column_stack([np.asarray(f, dtype=float) for f in residuals])
    L = F.shape[1]
    bounded = math.isfinite(c0)
    if bounded and c0 * L < 1.0:
        raise Infeasible(f"infeasible: c0={c0} < 1/{L}")
    e_last = np.zeros(L)
    e_last[-1] = 1.0
    if not F.any():
        return e_last, 0.0

    alpha = _affine_lstsq(F, np.zeros(F.shape[0]), 1.0, svd_cutoff)
    if bounded and np.any(np.abs(alpha) > c0):
        alpha = _box_lstsq(F, c0, svd_cutoff)
    objective = float(np.linalg.norm(F @ alpha))

    # a truncated SVD can in principle lose to a single residual; never return worse
    if not bounded or c0 >= 1.0:
        norms = np.linalg.norm(F, axis=0)
        j = int(np.argmin(norms))
        if norms[j] < objective:
            alpha = np.zeros(L)
            alpha[j] = 1.0
            objective = float(norms[j])
    return alpha, objective


def aa_step(q, history: AAHistory, config: AAConfig):
    """One AA(m) update from the current window.

    x_next = beta * sum alpha_j q(x_j) + (1 - beta) * sum alpha_j x_j
    """
    alpha, objective = aa_solve_subproblem(list(history.residuals), config.c0,
                                           config.svd_cutoff)
    X = np.column_stack(history.iterates)
    QX = np.column_stack(history.images)
    if config.beta == 1.0:
        x_next = QX @ alpha
    elif config.beta == 0.0:
        x_next = X @ alpha
    else:
        x_next = config.beta * (QX @ alpha) + (1.0 - config.beta) * (X @ alpha)
    return x_next, alpha, objective


class _Stagnation:
    def __init__(self, tol: float):
        self.onset = STAGNATION_ONSET * tol
        self.best = math.inf
        self.since = 0

    def update(self, r: float) -> bool:
        if r < self.best * (1.0 - STAGNATION_IMPROVEMENT):
            self.best = r
            self.since = 0
            return False
        self.best = min(self.best, r)
        if self.best < self.onset:
            self.since += 1
        return self.since >= STAGNATION_WINDOW


def _evaluate(q, x: np.ndarray, last_finite: np.ndarray) -> np.ndarray:
    if not np.all(np.isfinite(x)):
        raise Diverged("diverged: iterate is not finite", last_finite)
    qx = np.asarray(q.evaluate(x), dtype=float)
    if not np.all(np.isfinite(qx)):
        raise Diverged("diverged: operator returned non-finite values", x)
    return qx


def _check_start(q, x0) -> np.ndarray:
    x0 = np.array(x0, dtype=float)
    if x0.shape != (q.dimension,):
        raise ValueError(f"x0 has shape {x0.shape}, operator dimension is {q.dimension}")
    return x0


def fp_iterate(q, x0, tol: float = 1e-12, max_iter: int = 10_000) -> SolveTrace:
    """Plain fixed-point iteration x^(k+1) = q(x^(k))."""
    x = _check_start(q, x0)
    trace = SolveTrace()
    stall = _Stagnation(tol)
    k = 0
    while True:
        qx = _evaluate(q, x, x)
        r = float(np.linalg.norm(qx - x))
        trace.records.append(IterationRecord(k, x, r))
        if r <= tol:
            trace.reason = CONVERGED
            break
        if k >= max_iter:
            trace.reason = MAX_ITERATIONS
            break
        if stall.update(r):
            trace.reason = STAGNATED
            break
        x = qx
        k += 1
    return trace


def aa_solve(q, x0, config: AAConfig = AAConfig(), x1=None) -> SolveTrace:
    """Run AA(m) from x0.

    The first step is the (damped) fixed-point step x^(1) = q(x^(0)); from
    k = 1 on the window holds min(m, k) + 1 entries. Passing ``x1`` replaces
    the first step with a caller-chosen second iterate.
    """
    x = _check_start(q, x0)
    if x1 is not None:
        x1 = _check_start(q, x1)
    history = AAHistory(config.m)
    trace = SolveTrace()
    stall = _Stagnation(config.residual_tol)
    k = 0
    while True:
        qx = _evaluate(q, x, x)
        f = qx - x
        r = float(np.linalg.norm(f))
        record = IterationRecord(k, x, r)
        trace.records.append(record)
        if r <= config.residual_tol:
            trace.reason = CONVERGED
            break
        if k >= config.max_iterations:
            trace.reason = MAX_ITERATIONS
            break
        if stall.update(r):
            trace.reason = STAGNATED
            break
        history.push(x, qx, f)
        if k == 0:
            x = x1 if x1 is not None else config.beta * qx + (1.0 - config.beta) * x
        else:
            x, record.coefficients, record.objective = aa_step(q, history, config)
        k += 1
    return trace


def reformulated_aa_linear(W, xtilde0, xtilde1, m: int, steps: int,
                           c0: float = math.inf, svd_cutoff: float = 1e-12) -> np.ndarray:
    """AA(m) on q(x) = W x written directly in residual coordinates.

    y^(k+1) is the minimum-norm sum-to-one combination of the last min(m, k)+1
    residual vectors and the next residual is W y^(k+1). Returns the norms of
    xtilde^(0), ..., xtilde^(steps).
    """
    W = np.asarray(W, dtype=float)
    if np.linalg.norm(W - W.T) > 1e-12 * np.linalg.norm(W):
        raise ValueError("not symmetric")
    window = deque([np.asarray(xtilde0, float), np.asarray(xtilde1, float)], maxlen=m + 1)
    norms = [float(np.linalg.norm(v)) for v in window]
    for _ in range(steps - 1):
        alpha, _ = aa_solve_subproblem(list(window), c0, svd_cutoff)
        y = np.column_stack(window) @ alpha
        window.append(W @ y)
        norms.append(float(np.linalg.norm(window[-1])))
    return np.array(norms[: steps + 1])
