"""Tyler's M-estimator: the shape-matrix iteration and the log-weight iteration.

Shape iteration (trace normalised to p after each step)::

    G(S) = (p/n) sum_i x_i x_i^T / (x_i^T S^{-1} x_i)

Log-weight iteration, whose Jacobian is symmetric at fixed points::

    F_j(w) = -log(x_j^T S(w)^{-1} x_j),   S(w) = (p/n) sum_i exp(w_i) x_i x_i^T

The two are linked by S(F(w)) = G(S(w)).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg as sla

from .aacore import AAConfig, CONVERGED, FixedPointOperator, aa_solve, fp_iterate
from .theory import SpectrumSummary

COND_LIMIT = 1e14


class SingularShape(np.linalg.LinAlgError):
    pass


class SingularScatter(np.linalg.LinAlgError):
    pass


class LostPositivity(ArithmeticError):
    pass


@dataclass(frozen=True)
class TylerProblem:
    """Columns of X are the data points x_i in R^p."""

    X: np.ndarray

    def __post_init__(self):
        X = np.array(self.X, dtype=float)
        if X.ndim != 2:
            raise ValueError("X must be a p x n matrix")
        if np.any(np.all(X == 0.0, axis=0)):
            raise ValueError("data contain a zero column")
        X.setflags(write=False)
        object.__setattr__(self, "X", X)

    @property
    def p(self) -> int:
        return self.X.shape[0]

    @property
    def n(self) -> int:
        return self.X.shape[1]


def normalize_trace(S: np.ndarray) -> np.ndarray:
    return S * (S.shape[0] / np.trace(S))


def _inverse_quadratic_forms(S: np.ndarray, X: np.ndarray, error=SingularShape) -> np.ndarray:
    """x_i^T S^{-1} x_i for all columns via a Cholesky factor of S."""
    try:
        L = np.linalg.cholesky(S)
    except np.linalg.LinAlgError as exc:
        raise error(f"{_ERR_NAME[error]}: matrix is not positive definite") from exc
    diag = np.abs(np.diag(L))
    if diag.min() == 0.0 or (diag.max() / diag.min()) ** 2 > COND_LIMIT:
        raise error(f"{_ERR_NAME[error]}: condition estimate exceeds {COND_LIMIT:g}")
    Z = sla.solve_triangular(L, X, lower=True, check_finite=False)
    return np.einsum("ij,ij->j", Z, Z)


_ERR_NAME = {SingularShape: "singular shape", SingularScatter: "singular scatter"}


def tme_standard_step(Sigma: np.ndarray, prob: TylerProblem, normalize: bool = True) -> np.ndarray:
    X = prob.X
    quad = _inverse_quadratic_forms(np.asarray(Sigma, dtype=float), X, SingularShape)
    S = (prob.p / prob.n) * (X / quad) @ X.T
    S = 0.5 * (S + S.T)
    return normalize_trace(S) if normalize else S


def sigma_from_w(w: np.ndarray, prob: TylerProblem, normalize: bool = False) -> np.ndarray:
    X = prob.X
    S = (prob.p / prob.n) * (X * np.exp(w)) @ X.T
    S = 0.5 * (S + S.T)
    return normalize_trace(S) if normalize else S


def tme_log_step(w: np.ndarray, prob: TylerProblem) -> np.ndarray:
    w = np.asarray(w, dtype=float)
    if not np.all(np.isfinite(w)):
        raise ValueError("log weights must be finite")
    quad = _inverse_quadratic_forms(sigma_from_w(w, prob), prob.X, SingularScatter)
    if np.any(quad <= 0.0):
        raise LostPositivity("lost positivity: x^T S^{-1} x <= 0")
    return -np.log(quad)


def log_operator(prob: TylerProblem) -> FixedPointOperator:
    return FixedPointOperator(prob.n, lambda w: tme_log_step(w, prob))


def standard_operator(prob: TylerProblem) -> FixedPointOperator:
    """The trace-normalised shape iteration acting on flattened p x p matrices."""
    p = prob.p

    def evaluate(s):
        return tme_standard_step(s.reshape(p, p), prob).ravel()

    return FixedPointOperator(p * p, evaluate)


def w_from_sigma(Sigma: np.ndarray, prob: TylerProblem) -> np.ndarray:
    """One log-weight consistent with Sigma: w_j = -log(x_j^T Sigma^{-1} x_j)."""
    return -np.log(_inverse_quadratic_forms(Sigma, prob.X, SingularShape))


@dataclass
class TylerSolution:
    w: np.ndarray
    Sigma: np.ndarray
    residual: float
    method: str


def solve_reference(prob: TylerProblem, w0: np.ndarray | None = None,
                    tol: float = 1e-13) -> TylerSolution:
    """High-accuracy fixed point: AA(3) on the log iteration, plain steps as fallback."""
    q = log_operator(prob)
    w0 = np.zeros(prob.n) if w0 is None else np.asarray(w0, dtype=float)
    trace = aa_solve(q, w0, AAConfig(m=3, residual_tol=tol, max_iterations=5000))
    best = min(trace.records, key=lambda r: r.residual_norm)
    w, res, method = best.x, best.residual_norm, "aa3"
    if trace.reason != CONVERGED:
        fp = fp_iterate(q, w, tol=tol, max_iter=100_000)
        fbest = min(fp.records, key=lambda r: r.residual_norm)
        if fbest.residual_norm < res:
            w, res, method = fbest.x, fbest.residual_norm, "fp"
    return TylerSolution(w, sigma_from_w(w, prob, normalize=True), res, method)


def jacobian_fd(F, w: np.ndarray, step: float = 1e-5) -> np.ndarray:
    """Central differences; column j uses h = step * (1 + |w_j|)."""
    w = np.asarray(w, dtype=float)
    cols = []
    for j in range(w.size):
        h = step * (1.0 + abs(w[j]))
        e = np.zeros_like(w)
        e[j] = h
        cols.append((np.asarray(F(w + e)) - np.asarray(F(w - e))) / (2.0 * h))
    return np.column_stack(cols)


def symmetry_defect(J: np.ndarray) -> float:
    J = np.asarray(J, dtype=float)
    if J.ndim != 2 or J.shape[0] != J.shape[1]:
        raise ValueError("J must be square")
    return float(np.linalg.norm(J - J.T) / max(np.linalg.norm(J), np.finfo(float).tiny))


SCALE_MODE_COSINE = 0.99


def deflated_tme_spectrum(J: np.ndarray, max_defect: float = 1e-3) -> SpectrumSummary:
    """Spectrum summary of the Jacobian with the unit, constant-vector (scale) mode removed."""
    J = np.asarray(J, dtype=float)
    if symmetry_defect(J) > max_defect:
        raise ValueError(f"Jacobian symmetry defect exceeds {max_defect:g}")
    evals, evecs = np.linalg.eigh(0.5 * (J + J.T))
    ones = np.ones(J.shape[0]) / math.sqrt(J.shape[0])
    cosines = np.abs(ones @ evecs)
    candidates = np.nonzero(cosines >= SCALE_MODE_COSINE)[0]
    if candidates.size == 0:
        raise ValueError("no scale mode found")
    drop = candidates[np.argmin(np.abs(evals[candidates] - 1.0))]
    rest = np.delete(evals, drop)
    if abs(evals[drop] - 1.0) > 1e-3:
        raise ValueError("no scale mode found: constant mode is not near eigenvalue 1")
    return SpectrumSummary.from_extremes(float(rest.min()), float(rest.max()))


@dataclass
class ConditionReport:
    passed: bool
    violation: str | None = None
    checks: list[str] = field(default_factory=list)
    note: str = ("necessary conditions and sampled subspaces only; "
                 "the full subspace condition is not verified")


def check_tyler_necessary_conditions(prob: TylerProblem, samples: int = 200, seed: int = 0,
                                     dist_tol: float = 1e-8) -> ConditionReport:
    """Cheap necessary checks for existence/uniqueness of the estimator.

    Checks n > p, full row rank, an exact count of points on each line through
    a data point (d = 1), and ``samples`` random spans of d data points with
    2 <= d <= p-1. Distances are measured for unit-normalised points, since the
    condition only depends on directions.
    """
    from .datagen import SeededStream

    p, n = prob.p, prob.n
    report = ConditionReport(passed=True)

    def fail(msg):
        report.passed = False
        report.violation = msg
        return report

    report.checks.append("n > p")
    if n <= p:
        return fail(f"n > p violated (n={n}, p={p})")
    report.checks.append("full row rank")
    if np.linalg.matrix_rank(prob.X) < p:
        return fail("data do not span R^p")

    U = prob.X / np.linalg.norm(prob.X, axis=0)
    report.checks.append("lines through data points (d=1)")
    cos2 = np.clip((U.T @ U) ** 2, 0.0, 1.0)
    on_line = (1.0 - cos2) <= dist_tol**2
    counts = on_line.sum(axis=0)
    if counts.max() >= n / p:
        i = int(np.argmax(counts))
        return fail(f"line through point {i} holds {counts[i]} points >= n/p = {n / p:g}")

    if p > 2:
        report.checks.append(f"{samples} sampled spans (2 <= d <= p-1)")
        rng = SeededStream(seed)
        for _ in range(samples):
            d = 2 + int(rng.uniform() * (p - 2))
            idx = rng.choice(n, d)
            Q, _ = np.linalg.qr(U[:, idx])
            resid = U - Q @ (Q.T @ U)
            count = int(np.sum(np.linalg.norm(resid, axis=0) <= dist_tol))
            if count >= n * d / p:
                return fail(f"span of points {sorted(idx.tolist())} (d={d}) holds {count} "
                            f"points >= nd/p = {n * d / p:g}")
    return report


def write_data_csv(path, X: np.ndarray) -> None:
    """First line holds the dimensions "p,n"; then p rows of n values."""
    X = np.asarray(X, dtype=float)
    with open(path, "w") as fh:
        fh.write(f"{X.shape[0]},{X.shape[1]}\n")
        for row in X:
            fh.write(",".join(repr(float(v)) for v in row) + "\n")


def read_data_csv(path) -> TylerProblem:
    with open(path) as fh:
        p, n = (int(t) for t in fh.readline().split(","))
        X = np.array([[float(t) for t in line.split(",")] for line in fh if line.strip()])
    if X.shape != (p, n):
        raise ValueError(f"header says {p}x{n} but body is {X.shape[0]}x{X.shape[1]}")
    return TylerProblem(X)
