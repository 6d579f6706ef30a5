"""Affine operators q(x) = W x + a with symmetric W."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .aacore import FixedPointOperator  # noqa: F401  re-exported
from .datagen import SeededStream, random_orthogonal


@dataclass(frozen=True)
class LinearSymmetricOperator:
    W: np.ndarray
    a: np.ndarray = field(default=None)

    def __post_init__(self):
        W = np.array(self.W, dtype=float)
        if W.ndim != 2 or W.shape[0] != W.shape[1]:
            raise ValueError("W must be square")
        if np.linalg.norm(W - W.T) > 1e-12 * max(1.0, np.linalg.norm(W)):
            raise ValueError("W is not symmetric")
        a = np.zeros(W.shape[0]) if self.a is None else np.array(self.a, dtype=float)
        if a.shape != (W.shape[0],):
            raise ValueError("offset a has the wrong length")
        W.setflags(write=False)
        a.setflags(write=False)
        object.__setattr__(self, "W", W)
        object.__setattr__(self, "a", a)

    @property
    def dimension(self) -> int:
        return self.W.shape[0]

    @property
    def contractive(self) -> bool:
        evals = np.linalg.eigvalsh(self.W)
        return bool(evals[0] > -1.0 and evals[-1] < 1.0)

    def evaluate(self, x: np.ndarray) -> np.ndarray:
        return self.W @ x + self.a

    __call__ = evaluate

    def fixed_point(self) -> np.ndarray:
        return np.linalg.solve(np.eye(self.dimension) - self.W, self.a)

    def damped(self, beta: float) -> LinearSymmetricOperator:
        """The operator beta*q + (1 - beta)*I that damped AA effectively iterates."""
        n = self.dimension
        return LinearSymmetricOperator(beta * self.W + (1.0 - beta) * np.eye(n), beta * self.a)


def make_diag_operator(diagonal, a=None) -> LinearSymmetricOperator:
    diagonal = np.asarray(diagonal, dtype=float)
    if not np.all(np.isfinite(diagonal)):
        raise ValueError("diagonal entries must be finite")
    return LinearSymmetricOperator(np.diag(diagonal), a)


def make_random_symmetric(n: int, eig_low: float, eig_high: float,
                          forced_min_eig: float | None = None,
                          seed: int = 0) -> LinearSymmetricOperator:
    """W = Q diag(lam) Q^T with seeded eigenvalues and Haar-like Q.

    With ``forced_min_eig`` set, n-1 eigenvalues are drawn uniformly from
    [eig_low, eig_high] and the last one is the forced minimum. The eigenvalues
    are drawn before the orthogonal factor.
    """
    if not (-1.0 < eig_low <= eig_high < 1.0):
        raise ValueError("bad spectrum: need -1 < eig_low <= eig_high < 1")
    if forced_min_eig is not None and not (-1.0 < forced_min_eig <= eig_low):
        raise ValueError("bad spectrum: forced_min_eig must lie in (-1, eig_low]")
    rng = SeededStream(seed)
    if forced_min_eig is None:
        lam = rng.uniform(eig_low, eig_high, n)
    else:
        lam = np.append(rng.uniform(eig_low, eig_high, n - 1), forced_min_eig)
    Q = random_orthogonal(n, rng)
    W = (Q * lam) @ Q.T
    return LinearSymmetricOperator(0.5 * (W + W.T))


W1_DIAGONAL = (-0.07, 0.62, -0.55, -0.6, 0.15)
