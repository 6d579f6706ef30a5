"""Seeded generators for the Tyler test data and the random operators.

Every random draw in the package goes through :class:`SeededStream`, which
wraps numpy's Philox4x64 counter-based generator keyed directly by the seed.
Normals are produced with the Box-Muller transform from consecutive uniform
pairs ``(u1, u2)``::

    z0 = sqrt(-2 log(1 - u1)) * cos(2 pi u2)
    z1 = sqrt(-2 log(1 - u1)) * sin(2 pi u2)

emitted in the order ``z0, z1`` and consumed row-major when filling matrices.
Using ``1 - u1`` keeps the log argument in (0, 1].
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .tyler import TylerProblem

_SEED_MASK = (1 << 64) - 1


class SeededStream:
    """Deterministic uniform/normal stream for one experiment input."""

    def __init__(self, seed: int):
        self.seed = int(seed)
        self._gen = np.random.Generator(np.random.Philox(key=self.seed & _SEED_MASK))

    def uniform(self, low: float = 0.0, high: float = 1.0, size=None) -> np.ndarray:
        u = self._gen.random(size)
        return low + (high - low) * u

    def normal(self, size) -> np.ndarray:
        shape = (size,) if np.isscalar(size) else tuple(size)
        count = int(np.prod(shape))
        pairs = (count + 1) // 2
        u = self._gen.random(2 * pairs).reshape(pairs, 2)
        radius = np.sqrt(-2.0 * np.log1p(-u[:, 0]))
        angle = 2.0 * np.pi * u[:, 1]
        z = np.column_stack((radius * np.cos(angle), radius * np.sin(angle))).ravel()
        return z[:count].reshape(shape)

    def choice(self, n: int, k: int) -> np.ndarray:
        """k distinct indices out of range(n), by a partial Fisher-Yates shuffle."""
        idx = np.arange(n)
        for i in range(k):
            j = i + int(self._gen.random() * (n - i))
            idx[i], idx[j] = idx[j], idx[i]
        return idx[:k].copy()


@dataclass(frozen=True)
class DataModelSpec:
    model: str
    seed: int
    p: int = 20
    n: int = 40
    n0: int = 500
    n1: int = 497
    D: int = 100
    d: int = 50

    def __post_init__(self):
        if self.model == "model1":
            if self.p < 2 or self.n <= self.p:
                raise ValueError("model1 needs p >= 2 and n > p")
        elif self.model == "model2":
            if self.n0 + self.n1 <= self.D or self.d > self.D:
                raise ValueError("model2 needs n0 + n1 > D and d <= D")
        else:
            raise ValueError(f"unknown data model {self.model!r}")

    def generate(self) -> TylerProblem:
        if self.model == "model1":
            return gen_data_model_1(self.p, self.n, self.seed)
        return gen_data_model_2(self.n0, self.n1, self.D, self.d, self.seed)


def matrix_sqrt_psd(S: np.ndarray) -> np.ndarray:
    S = np.asarray(S, dtype=float)
    scale = max(1.0, np.linalg.norm(S))
    if np.linalg.norm(S - S.T) > 1e-12 * scale:
        raise ValueError("matrix is not symmetric")
    evals, evecs = np.linalg.eigh(S)
    if evals[0] < -1e-10 * scale:
        raise ValueError(f"matrix is indefinite (min eigenvalue {evals[0]:.3e})")
    R = (evecs * np.sqrt(np.clip(evals, 0.0, None))) @ evecs.T
    return 0.5 * (R + R.T)


def toeplitz_correlation(p: int, rho: float = 0.7) -> np.ndarray:
    idx = np.arange(p)
    return rho ** np.abs(idx[:, None] - idx[None, :])


def gen_data_model_1(p: int, n: int, seed: int) -> TylerProblem:
    """Correlated Gaussian data x_i = S^{1/2} z with S_ij = 0.7^|i-j|.

    Returns a problem whose columns are the n samples in R^p.
    """
    root = matrix_sqrt_psd(toeplitz_correlation(p))
    zeta = SeededStream(seed).normal((p, n))
    return TylerProblem(root @ zeta)


def gen_data_model_2(n0: int = 500, n1: int = 497, D: int = 100, d: int = 50,
                     seed: int = 0) -> TylerProblem:
    """Inlier/outlier model: n0 generic points plus n1 points in a d-dim coordinate subspace.

    Draw order: randn(n0, D), randn(D, D), randn(n1, d).
    """
    if d > D:
        raise ValueError("d must not exceed D")
    rng = SeededStream(seed)
    inliers = rng.normal((n0, D)) @ rng.normal((D, D))
    outliers = np.zeros((n1, D))
    outliers[:, :d] = rng.normal((n1, d)) / np.sqrt(d)
    return TylerProblem(np.vstack((inliers, outliers)).T)


def random_orthogonal(n: int, rng: SeededStream) -> np.ndarray:
    # sign fix on diag(R) makes Q Haar distributed
    Q, R = np.linalg.qr(rng.normal((n, n)))
    signs = np.sign(np.diag(R))
    signs[signs == 0] = 1.0
    return Q * signs
