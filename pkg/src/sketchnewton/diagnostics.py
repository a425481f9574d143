"""Experiment-grade measurements: bias proxies, deterministic-equivalent
validation, and the zero-curvature (Wishart) scaling check.

All routines here densify estimators, so they are desk-scale by
construction: dimensions are capped at ``MAX_DENSE_DIM``.  Every function is
pure given its seed; repeated calls agree bit-exactly.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from .calibration import choose_lambda_hat, mp_stieltjes_oracle, empirical_stieltjes
from .linalg import (
    DenseHessian,
    DiagonalHessian,
    HessianView,
    densify,
    hessian_dim,
    shifted_solve,
    symmetrize,
)
from .sketching import (
    Gaussian,
    SketchDistribution,
    densify_estimator,
    mix_seed,
    sample_sketch,
    sketch_hessian,
)

__all__ = [
    "ProxyStats",
    "bias_proxy",
    "DetEquivReport",
    "deterministic_equivalent_check",
    "WishartReport",
    "wishart_error_norm",
    "exp_decay_ensemble",
    "poly_decay_ensemble",
]

MAX_DENSE_DIM = 2000


@dataclass(frozen=True)
class ProxyStats:
    """Median and 20/80 percentiles of a per-trial statistic."""

    median: float
    p20: float
    p80: float
    values: np.ndarray

    @classmethod
    def from_values(cls, values) -> "ProxyStats":
        values = np.asarray(values, dtype=float)
        p20, med, p80 = np.percentile(values, [20, 50, 80])
        return cls(median=float(med), p20=float(p20), p80=float(p80), values=values)


def _check_dense_scale(d: int) -> None:
    if d > MAX_DENSE_DIM:
        raise ValueError(
            f"diagnostics densify full (d, d) estimators; d={d} exceeds the cap {MAX_DENSE_DIM}"
        )


def bias_proxy(
    view: HessianView,
    lam: float,
    m: int,
    q: int,
    dist: SketchDistribution,
    trials: int,
    seed: int,
) -> Tuple[ProxyStats, ProxyStats]:
    """Frobenius bias proxy ``||W_bar - W||_F^2 / d^2`` of the averaged
    estimator, with and without the calibrated regularizer.

    Both variants share the same sketches per worker, so the comparison
    isolates the effect of the regularizer alone.
    """
    d = hessian_dim(view)
    _check_dense_scale(d)
    h = densify(view)
    w_true = np.linalg.inv(h + lam * np.eye(d))
    corrected = np.empty(trials)
    uncorrected = np.empty(trials)
    for trial in range(trials):
        acc_c = np.zeros((d, d))
        acc_u = np.zeros((d, d))
        for worker in range(1, q + 1):
            sketch = sample_sketch(dist, m, d, mix_seed(seed, trial, worker))
            sk = sketch_hessian(sketch, view)
            lam_hat, _ = choose_lambda_hat(sk, lam)
            acc_c += densify_estimator(sk, lam_hat)
            acc_u += densify_estimator(sk, lam)
        corrected[trial] = np.sum((acc_c / q - w_true) ** 2) / d**2
        uncorrected[trial] = np.sum((acc_u / q - w_true) ** 2) / d**2
    return ProxyStats.from_values(corrected), ProxyStats.from_values(uncorrected)


@dataclass(frozen=True)
class DetEquivReport:
    """Monte Carlo averages against the deterministic fixed-point oracle."""

    mean_bilinear: float
    oracle_bilinear: float
    bilinear_deviation: float
    mean_stieltjes: float
    oracle_stieltjes: float
    stieltjes_deviation: float
    budget: float

    @property
    def within_budget(self) -> bool:
        return self.bilinear_deviation <= self.budget and self.stieltjes_deviation <= self.budget


def deterministic_equivalent_check(
    eigenvalues,
    m: int,
    z: float,
    trials: int,
    seed: int,
    u: Optional[np.ndarray] = None,
    v: Optional[np.ndarray] = None,
) -> DetEquivReport:
    """Compare ``u' S'(S H S' - z I)^{-1} S v`` against the deterministic
    limit ``u' (H + s(z)^{-1} I)^{-1} v`` for diagonal ``H``, ``z < 0``.

    The error budget ``5/sqrt(m)`` is deliberately loose; the Monte Carlo
    mean lands far inside it at moderate ``m``.
    """
    spec = np.asarray(eigenvalues, dtype=float)
    d = spec.shape[0]
    if z >= 0:
        raise ValueError(f"z must be negative, got {z}")
    if u is None:
        u = np.zeros(d)
        u[0] = 1.0
    if v is None:
        v = u
    view = DiagonalHessian(spec)
    bilinears = np.empty(trials)
    stieltjes = np.empty(trials)
    for trial in range(trials):
        sketch = sample_sketch(Gaussian(), m, d, mix_seed(seed, trial))
        sk = sketch_hessian(sketch, view)
        su = sk.sketch.matrix @ u
        sv = sk.sketch.matrix @ v
        bilinears[trial] = su @ shifted_solve(sk.decomp, -z, sv)
        stieltjes[trial] = empirical_stieltjes(sk, z)
    s_oracle = mp_stieltjes_oracle(spec, m, z)
    oracle_bilinear = float(np.sum(u * v / (spec + 1.0 / s_oracle)))
    return DetEquivReport(
        mean_bilinear=float(np.mean(bilinears)),
        oracle_bilinear=oracle_bilinear,
        bilinear_deviation=abs(float(np.mean(bilinears)) - oracle_bilinear),
        mean_stieltjes=float(np.mean(stieltjes)),
        oracle_stieltjes=s_oracle,
        stieltjes_deviation=abs(float(np.mean(stieltjes)) - s_oracle),
        budget=5.0 / np.sqrt(m),
    )


@dataclass(frozen=True)
class WishartReport:
    """Spectral-norm error of the averaged estimator at zero curvature."""

    median_error: float
    errors: np.ndarray
    reference: float

    @property
    def within_factor(self) -> float:
        return max(self.median_error / self.reference, self.reference / self.median_error)


def wishart_error_norm(
    d: int,
    m: int,
    q: int,
    lam: float = 1.0,
    trials: int = 10,
    seed: int = 0,
    dist: SketchDistribution = Gaussian(),
) -> WishartReport:
    """With ``H = 0`` the averaged estimator reduces to a sample covariance
    of ``q*m`` Gaussian rows; ``||W_bar - I||`` then concentrates around
    ``max(d/(m q), sqrt(d/(m q)))``, and is at least 1 if ``q m < d``
    (rank deficiency).
    """
    _check_dense_scale(d)
    view = DiagonalHessian(np.zeros(d))
    errors = np.empty(trials)
    for trial in range(trials):
        acc = np.zeros((d, d))
        for worker in range(1, q + 1):
            sketch = sample_sketch(dist, m, d, mix_seed(seed, trial, worker))
            sk = sketch_hessian(sketch, view)
            lam_hat, _ = choose_lambda_hat(sk, lam)
            acc += densify_estimator(sk, lam_hat)
        diff = acc / q
        diff[np.diag_indices_from(diff)] -= 1.0
        w = np.linalg.eigvalsh(diff)
        errors[trial] = max(abs(w[0]), abs(w[-1]))
    ratio = d / (m * q)
    return WishartReport(
        median_error=float(np.median(errors)),
        errors=errors,
        reference=max(ratio, np.sqrt(ratio)),
    )


def _haar_orthogonal(rng: np.random.Generator, d: int) -> np.ndarray:
    a = rng.standard_normal((d, d))
    qmat, r = np.linalg.qr(a)
    return qmat * np.sign(np.diag(r))


def exp_decay_ensemble(d: int, seed: int) -> Tuple[HessianView, float]:
    """Random curvature with exponentially decaying spectrum.

    Eigenvalues ``(0.9 + eps_k)^k`` with ``eps_k ~ N(0, 1e-4)``, Haar
    eigenvectors; paired ridge level 1e-3.
    """
    rng = np.random.default_rng(seed)
    k = np.arange(1, d + 1)
    eps = rng.normal(0.0, 1e-2, size=d)
    tau = (0.9 + eps) ** k
    v = _haar_orthogonal(rng, d)
    return DenseHessian(symmetrize((v * tau) @ v.T)), 1e-3


def poly_decay_ensemble(d: int, seed: int) -> Tuple[HessianView, float]:
    """Random curvature with polynomially graded spectrum.

    Eigenvalues ``(k/d)^4`` (squared singular values ``(k/d)^2``), Haar
    eigenvectors; paired ridge level 1e-5.
    """
    rng = np.random.default_rng(seed)
    k = np.arange(1, d + 1)
    tau = (k / d) ** 4
    v = _haar_orthogonal(rng, d)
    return DenseHessian(symmetrize((v * tau) @ v.T)), 1e-5
