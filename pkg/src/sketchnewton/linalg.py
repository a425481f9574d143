"""Dense symmetric linear-algebra kernels shared by the whole package.

Curvature matrices come in three layouts:

* :class:`DenseHessian` -- an explicit symmetric ``(d, d)`` array,
* :class:`FactoredHessian` -- ``H = A.T @ A`` held through its ``(n, d)``
  factor (the natural form for generalized linear models),
* :class:`DiagonalHessian` -- only the diagonal, for synthetic spectra at
  large ``d`` where a dense ``(d, d)`` array would be wasteful.

All three expose matrix-vector products via :func:`hessian_matvec` and can
be materialized with :func:`densify`.  The canonical factorization of any
symmetric matrix here is the eigendecomposition (:func:`sym_eig`): one
O(d^3) factorization serves both repeated shifted solves with varying
shifts and spectral statistics that need every eigenvalue.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Union

import numpy as np

__all__ = [
    "EigensolverError",
    "SpectralDecomposition",
    "DenseHessian",
    "FactoredHessian",
    "DiagonalHessian",
    "HessianView",
    "symmetrize",
    "sym_eig",
    "shifted_solve",
    "hessian_matvec",
    "hessian_dim",
    "densify",
]

# Eigenvalues of a genuinely PSD matrix may come out slightly negative;
# anything above -PSD_RTOL * ||M||_2 is treated as numerical zero.
PSD_RTOL = 1e-10


class EigensolverError(RuntimeError):
    """Raised when the symmetric eigensolver fails to converge."""


def symmetrize(matrix: np.ndarray) -> np.ndarray:
    """Return ``(M + M.T) / 2``, which is exactly symmetric in floating point."""
    matrix = np.asarray(matrix, dtype=float)
    if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {matrix.shape}")
    return (matrix + matrix.T) / 2.0


@dataclass(frozen=True)
class SpectralDecomposition:
    """Eigendecomposition ``M = U diag(w) U.T`` with eigenvalues descending.

    ``eigenvalues[i]`` corresponds to column ``eigenvectors[:, i]``.
    """

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    @property
    def dim(self) -> int:
        return self.eigenvalues.shape[0]

    def reconstruct(self) -> np.ndarray:
        u = self.eigenvectors
        return symmetrize((u * self.eigenvalues) @ u.T)


def sym_eig(matrix: np.ndarray) -> SpectralDecomposition:
    """Full symmetric eigendecomposition, eigenvalues sorted descending.

    Raises
    ------
    EigensolverError
        If LAPACK does not converge; the underlying error is chained.
    """
    matrix = np.asarray(matrix, dtype=float)
    if not np.all(np.isfinite(matrix)):
        raise ValueError("matrix contains non-finite entries")
    try:
        w, u = np.linalg.eigh(matrix)
    except np.linalg.LinAlgError as exc:  # pragma: no cover - LAPACK failure
        raise EigensolverError(f"symmetric eigensolver failed: {exc}") from exc
    # eigh returns ascending order
    return SpectralDecomposition(w[::-1].copy(), u[:, ::-1].copy())


def shifted_solve(decomp: SpectralDecomposition, shift: float, v: np.ndarray) -> np.ndarray:
    """Solve ``(M + shift*I) x = v`` given the eigendecomposition of ``M``.

    Eigenvalues below zero are clamped to zero first (PSD round-off), so the
    solve is well posed for every ``shift > 0``.
    """
    if shift <= 0:
        raise ValueError(f"shift must be positive, got {shift}")
    w = np.maximum(decomp.eigenvalues, 0.0)
    u = decomp.eigenvectors
    return u @ ((u.T @ v) / (w + shift))


@dataclass(frozen=True)
class DenseHessian:
    """Symmetric ``(d, d)`` curvature matrix, stored exactly symmetric."""

    matrix: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "matrix", symmetrize(self.matrix))


class FactoredHessian:
    """Curvature ``H = A.T @ A`` represented by its ``(n, d)`` factor ``A``.

    The densified form is cached: when sketching many times against the same
    Hessian with n >> d, forming ``H`` once and sketching the dense array is
    cheaper than the O(n*d*m) factored product per sketch.
    """

    def __init__(self, factor: np.ndarray):
        factor = np.asarray(factor, dtype=float)
        if factor.ndim != 2:
            raise ValueError(f"factor must be 2-D, got shape {factor.shape}")
        self.factor = factor

    @property
    def rows(self) -> int:
        return self.factor.shape[0]

    @cached_property
    def dense(self) -> np.ndarray:
        return symmetrize(self.factor.T @ self.factor)


@dataclass(frozen=True)
class DiagonalHessian:
    """Diagonal curvature matrix given by its diagonal entries."""

    diag: np.ndarray

    def __post_init__(self):
        diag = np.asarray(self.diag, dtype=float)
        if diag.ndim != 1:
            raise ValueError(f"diag must be 1-D, got shape {diag.shape}")
        object.__setattr__(self, "diag", diag)


HessianView = Union[DenseHessian, FactoredHessian, DiagonalHessian]


def hessian_dim(view: HessianView) -> int:
    if isinstance(view, DenseHessian):
        return view.matrix.shape[0]
    if isinstance(view, FactoredHessian):
        return view.factor.shape[1]
    if isinstance(view, DiagonalHessian):
        return view.diag.shape[0]
    raise TypeError(f"not a Hessian view: {type(view)!r}")


def hessian_matvec(view: HessianView, v: np.ndarray) -> np.ndarray:
    """Compute ``H v`` without densifying a factored view."""
    v = np.asarray(v, dtype=float)
    d = hessian_dim(view)
    if v.shape != (d,):
        raise ValueError(f"vector has shape {v.shape}, expected ({d},)")
    if isinstance(view, DenseHessian):
        return view.matrix @ v
    if isinstance(view, FactoredHessian):
        return view.factor.T @ (view.factor @ v)
    return view.diag * v


def densify(view: HessianView) -> np.ndarray:
    """Materialize the view as a symmetric ``(d, d)`` array."""
    if isinstance(view, DenseHessian):
        return view.matrix
    if isinstance(view, FactoredHessian):
        return view.dense
    if isinstance(view, DiagonalHessian):
        return np.diag(view.diag)
    raise TypeError(f"not a Hessian view: {type(view)!r}")
