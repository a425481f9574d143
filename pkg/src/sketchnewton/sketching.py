"""Random sketching matrices and the debiased sketched inverse estimator.

A sketch is an ``(m, d)`` random matrix ``S`` with i.i.d. zero-mean entries
of variance ``1/m``, so that ``E[S.T @ S] = I``.  Compressing a curvature
matrix ``H`` to the small Gram matrix ``S @ H @ S.T`` and applying

    W_hat @ g = S.T @ (S H S.T + lam_hat * I)^{-1} @ (S @ g)

gives a cheap, low-bias estimate of ``(H + lam * I)^{-1} g`` once
``lam_hat`` has been calibrated (see :mod:`sketchnewton.calibration`).

Seeding is deterministic and splittable: :func:`mix_seed` hashes
(master seed, round, worker) into a single 64-bit stream seed, which makes
whole runs reproducible while keeping worker streams statistically
independent.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

import numpy as np

from .linalg import (
    DiagonalHessian,
    FactoredHessian,
    HessianView,
    SpectralDecomposition,
    densify,
    hessian_dim,
    shifted_solve,
    sym_eig,
    symmetrize,
)

__all__ = [
    "Gaussian",
    "Rademacher",
    "SparseRademacher",
    "SketchDistribution",
    "parse_distribution",
    "mix_seed",
    "SketchSample",
    "SketchedHessian",
    "sample_sketch",
    "sketch_hessian",
    "apply_debiased_inverse",
    "densify_estimator",
]

_MASK64 = (1 << 64) - 1


@dataclass(frozen=True)
class Gaussian:
    """Entries ``N(0, 1/m)``."""


@dataclass(frozen=True)
class Rademacher:
    """Entries uniform on ``{-1/sqrt(m), +1/sqrt(m)}``."""


@dataclass(frozen=True)
class SparseRademacher:
    """Entries 0 w.p. ``1-p`` and ``+-1/sqrt(p*m)`` w.p. ``p/2`` each."""

    p: float = 0.1

    def __post_init__(self):
        if not (0.0 < self.p <= 1.0):
            raise ValueError(f"sparsity p must lie in (0, 1], got {self.p}")


SketchDistribution = Union[Gaussian, Rademacher, SparseRademacher]

_DIST_NAMES = {
    "gaussian": Gaussian,
    "rademacher": Rademacher,
    "sparse-rademacher": SparseRademacher,
}


def parse_distribution(name: str) -> SketchDistribution:
    try:
        return _DIST_NAMES[name]()
    except KeyError:
        raise ValueError(
            f"unknown sketch distribution {name!r}; choose from {sorted(_DIST_NAMES)}"
        ) from None


def mix_seed(*parts: int) -> int:
    """Hash integers into one 64-bit seed (SplitMix64 finalizer per part)."""
    acc = 0x9E3779B97F4A7C15
    for part in parts:
        z = (acc + (int(part) & _MASK64) + 0x9E3779B97F4A7C15) & _MASK64
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
        acc = z ^ (z >> 31)
    return acc


@dataclass(frozen=True)
class SketchSample:
    """An ``(m, d)`` sketching matrix together with its provenance."""

    matrix: np.ndarray
    dist: SketchDistribution
    seed: int

    @property
    def m(self) -> int:
        return self.matrix.shape[0]

    @property
    def d(self) -> int:
        return self.matrix.shape[1]


def sample_sketch(dist: SketchDistribution, m: int, d: int, seed: int) -> SketchSample:
    """Draw a sketch; bit-identical for identical ``(dist, m, d, seed)``."""
    if m < 1 or d < 1:
        raise ValueError(f"sketch dimensions must be positive, got m={m}, d={d}")
    rng = np.random.default_rng(seed)
    if isinstance(dist, Gaussian):
        matrix = rng.standard_normal((m, d)) / np.sqrt(m)
    elif isinstance(dist, Rademacher):
        signs = 2.0 * rng.integers(0, 2, size=(m, d)) - 1.0
        matrix = signs / np.sqrt(m)
    elif isinstance(dist, SparseRademacher):
        keep = rng.random((m, d)) < dist.p
        signs = 2.0 * rng.integers(0, 2, size=(m, d)) - 1.0
        matrix = np.where(keep, signs / np.sqrt(dist.p * m), 0.0)
    else:
        raise TypeError(f"not a sketch distribution: {dist!r}")
    return SketchSample(matrix=matrix, dist=dist, seed=seed)


@dataclass(frozen=True)
class SketchedHessian:
    """``S @ H @ S.T`` with its eigendecomposition, reused for all solves.

    ``decomp`` eigenvalues are clamped to zero from below (the Gram matrix
    is PSD up to round-off), so every downstream shifted solve and spectral
    statistic sees a genuinely non-negative spectrum.
    """

    gram: np.ndarray
    decomp: SpectralDecomposition
    sketch: SketchSample

    @property
    def m(self) -> int:
        return self.gram.shape[0]


def sketch_hessian(sketch: SketchSample, view: HessianView) -> SketchedHessian:
    """Form the sketched Gram matrix and factor it once.

    The multiplication route depends on the Hessian layout: diagonal views
    cost O(d m^2); factored views use the O(n d m) product only while
    ``n <= d + m``, otherwise the cached dense form is cheaper.
    """
    d = hessian_dim(view)
    if sketch.d != d:
        raise ValueError(f"sketch dimension {sketch.d} != Hessian dimension {d}")
    s = sketch.matrix
    if isinstance(view, DiagonalHessian):
        gram = (s * view.diag) @ s.T
    elif isinstance(view, FactoredHessian) and view.rows <= d + sketch.m:
        b = view.factor @ s.T
        gram = b.T @ b
    else:
        gram = s @ densify(view) @ s.T
    gram = symmetrize(gram)
    decomp = sym_eig(gram)
    w = decomp.eigenvalues
    norm = max(w[0], -w[-1], 0.0)
    if w[-1] < -1e-10 * max(1.0, norm):
        raise ValueError(f"sketched Gram matrix is not PSD: min eigenvalue {w[-1]:.3e}")
    clamped = SpectralDecomposition(np.maximum(w, 0.0), decomp.eigenvectors)
    return SketchedHessian(gram=gram, decomp=clamped, sketch=sketch)


def apply_debiased_inverse(sk: SketchedHessian, lam_hat: float, g: np.ndarray) -> np.ndarray:
    """Evaluate ``S.T (S H S.T + lam_hat I)^{-1} S g``; lies in the row space of S."""
    if lam_hat <= 0:
        raise ValueError(f"lam_hat must be positive, got {lam_hat}")
    g = np.asarray(g, dtype=float)
    if g.shape != (sk.sketch.d,):
        raise ValueError(f"gradient has shape {g.shape}, expected ({sk.sketch.d},)")
    s = sk.sketch.matrix
    return s.T @ shifted_solve(sk.decomp, lam_hat, s @ g)


def densify_estimator(sk: SketchedHessian, lam_hat: float) -> np.ndarray:
    """Materialize ``W_hat = S.T (S H S.T + lam_hat I)^{-1} S`` (rank <= m).

    Intended for diagnostics at moderate ``d``; costs O(d^2 m) and returns a
    symmetric PSD ``(d, d)`` array.
    """
    if lam_hat <= 0:
        raise ValueError(f"lam_hat must be positive, got {lam_hat}")
    c = sk.decomp.eigenvectors.T @ sk.sketch.matrix
    scaled = c / (sk.decomp.eigenvalues + lam_hat)[:, None]
    return symmetrize(c.T @ scaled)
