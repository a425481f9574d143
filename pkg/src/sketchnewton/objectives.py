"""Twice-differentiable convex objectives ``G(theta) = F(theta) + (lam/2)||theta||^2``.

The regularizer is carried by the objective but deliberately kept OUT of the
reported curvature: ``gradient`` includes the ``lam * theta`` term, while
``hessian`` returns the curvature of ``F`` alone.  The ridge level enters the
sketched solves only through the calibrated regularizer, so mixing it into
the Hessian would corrupt that calibration.

Loss normalization: both ridge and logistic losses average over the ``n``
data rows (``1/n`` factor).  The meaning of ``lam`` depends on this choice.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .linalg import (
    DenseHessian,
    FactoredHessian,
    HessianView,
    symmetrize,
    sym_eig,
)

__all__ = [
    "Dataset",
    "Objective",
    "ridge_objective",
    "logistic_objective",
    "quadratic_objective",
]

# Lower clamp for logistic curvature weights sigma*(1-sigma); keeps the
# factored Hessian view usable in saturated regimes.
MIN_LOGISTIC_WEIGHT = 1e-12


@dataclass(frozen=True)
class Dataset:
    """Design matrix ``X`` (rows are covariates) and response vector ``y``."""

    X: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        X = np.asarray(self.X, dtype=float)
        y = np.asarray(self.y, dtype=float)
        if X.ndim != 2:
            raise ValueError(f"X must be 2-D, got shape {X.shape}")
        if y.shape != (X.shape[0],):
            raise ValueError(f"y has shape {y.shape}, expected ({X.shape[0]},)")
        if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
            raise ValueError("dataset contains NaN or Inf entries")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def dim(self) -> int:
        return self.X.shape[1]


class Objective:
    """Base contract: value / gradient / hessian plus the ridge level.

    ``constant_hessian`` tells the solver whether the curvature depends on
    the iterate (drives the default calibration policy).
    """

    ridge_lambda: float
    dim: int
    constant_hessian: bool = False

    def value(self, theta: np.ndarray) -> float:
        raise NotImplementedError

    def gradient(self, theta: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def hessian(self, theta: np.ndarray) -> HessianView:
        raise NotImplementedError

    def _check(self, theta: np.ndarray) -> np.ndarray:
        theta = np.asarray(theta, dtype=float)
        if theta.shape != (self.dim,):
            raise ValueError(f"theta has shape {theta.shape}, expected ({self.dim},)")
        return theta


class RidgeObjective(Objective):
    """Mean squared error plus ridge: ``(1/n)||X theta - y||^2 + (lam/2)||theta||^2``."""

    constant_hessian = True

    def __init__(self, data: Dataset, lam: float):
        if lam <= 0:
            raise ValueError("ridge level lam must be positive")
        self.data = data
        self.ridge_lambda = float(lam)
        self.dim = data.dim
        # H = (2/n) X' X, held as A' A with A = sqrt(2/n) X
        self._hess = FactoredHessian(np.sqrt(2.0 / data.n) * data.X)

    def value(self, theta):
        theta = self._check(theta)
        r = self.data.X @ theta - self.data.y
        return float(np.mean(r * r) + 0.5 * self.ridge_lambda * (theta @ theta))

    def gradient(self, theta):
        theta = self._check(theta)
        r = self.data.X @ theta - self.data.y
        return (2.0 / self.data.n) * (self.data.X.T @ r) + self.ridge_lambda * theta

    def hessian(self, theta):
        return self._hess


def _sigmoid(t: np.ndarray) -> np.ndarray:
    out = np.empty_like(t)
    pos = t >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-t[pos]))
    e = np.exp(t[~pos])
    out[~pos] = e / (1.0 + e)
    return out


class LogisticObjective(Objective):
    """Mean log-loss with {0,1} labels plus ridge."""

    constant_hessian = False

    def __init__(self, data: Dataset, lam: float):
        if lam <= 0:
            raise ValueError("ridge level lam must be positive")
        labels = np.unique(data.y)
        if not np.all(np.isin(labels, (0.0, 1.0))):
            raise ValueError(f"logistic labels must lie in {{0, 1}}, got {labels}")
        self.data = data
        self.ridge_lambda = float(lam)
        self.dim = data.dim

    def value(self, theta):
        theta = self._check(theta)
        z = self.data.X @ theta
        y = self.data.y
        # -[y log sigma(z) + (1-y) log(1 - sigma(z))], written overflow-free
        loss = np.mean(y * np.logaddexp(0.0, -z) + (1.0 - y) * np.logaddexp(0.0, z))
        return float(loss + 0.5 * self.ridge_lambda * (theta @ theta))

    def gradient(self, theta):
        theta = self._check(theta)
        z = self.data.X @ theta
        s = _sigmoid(z)
        g = self.data.X.T @ (s - self.data.y) / self.data.n
        return g + self.ridge_lambda * theta

    def hessian(self, theta):
        theta = self._check(theta)
        s = _sigmoid(self.data.X @ theta)
        w = np.clip(s * (1.0 - s), MIN_LOGISTIC_WEIGHT, None)
        # H = (1/n) X' diag(w) X  =  A' A with A = sqrt(w/n) * X (row-scaled)
        return FactoredHessian(np.sqrt(w / self.data.n)[:, None] * self.data.X)


class QuadraticObjective(Objective):
    """``0.5 theta' H theta - b' theta + (lam/2)||theta||^2`` for PSD ``H``."""

    constant_hessian = True

    def __init__(self, H: np.ndarray, b: np.ndarray, lam: float):
        if lam <= 0:
            raise ValueError("ridge level lam must be positive")
        H = symmetrize(H)
        b = np.asarray(b, dtype=float)
        if b.shape != (H.shape[0],):
            raise ValueError(f"b has shape {b.shape}, expected ({H.shape[0]},)")
        w = sym_eig(H).eigenvalues
        norm = w[0] if w.size else 0.0
        if w.size and w[-1] < -1e-10 * max(1.0, norm):
            raise ValueError(f"H is not PSD: smallest eigenvalue {w[-1]:.3e}")
        self._H = H
        self._b = b
        self.ridge_lambda = float(lam)
        self.dim = H.shape[0]

    def value(self, theta):
        theta = self._check(theta)
        return float(
            0.5 * theta @ (self._H @ theta)
            - self._b @ theta
            + 0.5 * self.ridge_lambda * (theta @ theta)
        )

    def gradient(self, theta):
        theta = self._check(theta)
        return self._H @ theta - self._b + self.ridge_lambda * theta

    def hessian(self, theta):
        return DenseHessian(self._H)


def ridge_objective(data: Dataset, lam: float) -> RidgeObjective:
    return RidgeObjective(data, lam)


def logistic_objective(data: Dataset, lam: float) -> LogisticObjective:
    return LogisticObjective(data, lam)


def quadratic_objective(H: np.ndarray, b: np.ndarray, lam: float) -> QuadraticObjective:
    return QuadraticObjective(H, b, lam)
