"""Spectral calibration of the sketch size and the debiasing regularizer.

Everything here revolves around two Stieltjes transforms of the sketched
Gram matrix ``G = S H S.T``:

* the *empirical* transform ``s_emp(z) = (1/m) sum_i 1/(eig_i(G) - z)``,
  computable from one eigendecomposition of ``G``;
* a *deterministic* fixed-point transform ``s(z)`` solving
  ``1/s = -z + (1/m) tr(H (I + s H)^{-1})``, used only as a test oracle.

For a ridge level ``lam``, the debiased sketched inverse wants the
regularizer ``t`` solving ``s_emp(-t) = 1/lam``.  Its deterministic
counterpart has the closed form ``lam * (1 - d_eff(lam)/m)`` whenever the
sketch size ``m`` exceeds the effective dimension
``d_eff(lam) = tr(H (H + lam I)^{-1})``.

Two adaptive routines build on this:

* :func:`choose_m` -- doubling search for the sketch size, accepting the
  first ``m`` whose probe ``s_emp(-5 lam/12) > 1/lam`` passes (with high
  probability this lands in ``[1.5 d_eff, 4 d_eff]``);
* :func:`choose_lambda_hat` -- bisection for the debiasing regularizer in
  the bracket ``[5 lam/12, lam]``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import List, NamedTuple, Tuple

import numpy as np

from .linalg import HessianView, hessian_dim
from .sketching import (
    SketchDistribution,
    SketchedHessian,
    mix_seed,
    sample_sketch,
    sketch_hessian,
)

__all__ = [
    "effective_dimension",
    "OracleLambda",
    "oracle_lambda_tilde",
    "empirical_stieltjes",
    "mp_stieltjes_oracle",
    "mp_psi",
    "test_sketch_dim",
    "MTrial",
    "choose_m",
    "LambdaHat",
    "choose_lambda_hat",
    "CalibrationResult",
    "calibrate",
]

# Probe point for the sketch-size test, as a multiple of lam.
PROBE_FACTOR = 5.0 / 12.0
# Relative bracket width at which bisections stop.
BISECT_RTOL = 1e-12
BISECT_MAX_ITERS = 200


def _as_spectrum(eigenvalues) -> np.ndarray:
    spec = np.asarray(eigenvalues, dtype=float)
    if spec.ndim != 1:
        raise ValueError(f"spectrum must be 1-D, got shape {spec.shape}")
    if spec.size and spec.min() < 0:
        raise ValueError(f"spectrum must be non-negative, min entry {spec.min():.3e}")
    return spec


def effective_dimension(eigenvalues, mu: float) -> float:
    """``sum_i tau_i / (tau_i + mu)``; decreasing in ``mu``, in ``[0, d]``."""
    if mu <= 0:
        raise ValueError(f"mu must be positive, got {mu}")
    spec = _as_spectrum(eigenvalues)
    return float(np.sum(spec / (spec + mu)))


class OracleLambda(NamedTuple):
    """Debiasing level ``lam * (1 - d_eff/m)``; invalid when ``m <= d_eff``."""

    value: float
    valid: bool


def oracle_lambda_tilde(eigenvalues, lam: float, m: int) -> OracleLambda:
    """Deterministic root of ``s(-t) = 1/lam``, from the spectrum of ``H``."""
    if lam <= 0:
        raise ValueError(f"lam must be positive, got {lam}")
    if m < 1:
        raise ValueError(f"m must be positive, got {m}")
    d_eff = effective_dimension(eigenvalues, lam)
    value = lam * (1.0 - d_eff / m)
    return OracleLambda(value=value, valid=m > d_eff)


def empirical_stieltjes(sk: SketchedHessian, z: float) -> float:
    """``(1/m) sum_i 1/(eig_i - z)`` for ``z <= 0``; ``+inf`` at a singular 0.

    At ``z = 0`` eigenvalues below ``1e-12 * max(1, ||G||)`` count as exact
    zeros, so a rank-deficient Gram matrix correctly reports an infinite
    transform (the limit from the left).
    """
    if z > 0:
        raise ValueError(f"z must be non-positive, got {z}")
    w = sk.decomp.eigenvalues
    if z == 0.0:
        zero_tol = 1e-12 * max(1.0, w[0] if w.size else 0.0)
        if w.size == 0 or w[-1] <= zero_tol:
            return math.inf
    return float(np.mean(1.0 / (w - z)))


def mp_psi(eigenvalues, m: int, s: float) -> float:
    """Inverse transform ``Psi(s) = (1/m) tr(H (I + s H)^{-1}) - 1/s``."""
    if s <= 0:
        raise ValueError(f"s must be positive, got {s}")
    spec = _as_spectrum(eigenvalues)
    return float(np.sum(spec / (1.0 + s * spec)) / m - 1.0 / s)


def mp_stieltjes_oracle(eigenvalues, m: int, z: float) -> float:
    """Solve the deterministic fixed-point equation for ``s(z)``, ``z < 0``.

    The residual ``r(s) = 1/s + z - (1/m) sum tau/(1 + s tau)`` decreases
    strictly from ``+inf`` to a negative limit on the relevant branch, so a
    geometric bracket expansion plus bisection always converges.
    """
    if z >= 0:
        raise ValueError(f"z must be negative, got {z}")
    spec = _as_spectrum(eigenvalues)

    def residual(s: float) -> float:
        return 1.0 / s + z - float(np.sum(spec / (1.0 + s * spec))) / m

    lo = hi = 1.0
    for _ in range(200):
        if residual(hi) < 0:
            break
        hi *= 2.0
    else:  # pragma: no cover - impossible for z < 0
        raise RuntimeError("bisection bracket expansion failed (upper end)")
    for _ in range(200):
        if residual(lo) > 0:
            break
        lo /= 2.0
    else:  # pragma: no cover
        raise RuntimeError("bisection bracket expansion failed (lower end)")
    for _ in range(BISECT_MAX_ITERS):
        mid = 0.5 * (lo + hi)
        if residual(mid) > 0:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-15 * hi:
            break
    s = 0.5 * (lo + hi)
    fixed_point_gap = abs(1.0 / s - (-z + float(np.sum(spec / (1.0 + s * spec))) / m))
    if fixed_point_gap > 1e-12 * max(1.0, abs(z), 1.0 / s):
        raise RuntimeError(f"fixed-point residual {fixed_point_gap:.3e} too large")
    return s


def test_sketch_dim(sk: SketchedHessian, lam: float) -> bool:
    """Accept the current sketch size iff ``s_emp(-5 lam/12) > 1/lam``."""
    if lam <= 0:
        raise ValueError(f"lam must be positive, got {lam}")
    return empirical_stieltjes(sk, -PROBE_FACTOR * lam) > 1.0 / lam


class MTrial(NamedTuple):
    """One probe of the doubling search."""

    m: int
    stieltjes_at_probe: float
    accepted: bool


def choose_m(
    view: HessianView,
    lam: float,
    m0: int,
    dist: SketchDistribution,
    seed: int,
) -> Tuple[int, SketchedHessian, List[MTrial], bool]:
    """Doubling search for the sketch size (fresh sketch per probe).

    Returns ``(m_hat, sketched, trace, capped)``.  The loop runs while
    ``m < d``; if no probe accepts, ``m`` is capped at ``d`` (at that point
    sketching no longer saves work) and a final sketch is drawn without
    testing, with ``capped`` set.
    """
    if m0 < 1:
        raise ValueError(f"m0 must be positive, got {m0}")
    if lam <= 0:
        raise ValueError(f"lam must be positive, got {lam}")
    d = hessian_dim(view)
    trace: List[MTrial] = []
    m = m0
    step = 0
    while m < d:
        sk = sketch_hessian(sample_sketch(dist, m, d, mix_seed(seed, step)), view)
        s_val = empirical_stieltjes(sk, -PROBE_FACTOR * lam)
        accepted = s_val > 1.0 / lam
        trace.append(MTrial(m, s_val, accepted))
        if accepted:
            return m, sk, trace, False
        m *= 2
        step += 1
    m = min(m, d)
    sk = sketch_hessian(sample_sketch(dist, m, d, mix_seed(seed, step)), view)
    s_val = empirical_stieltjes(sk, -PROBE_FACTOR * lam)
    trace.append(MTrial(m, s_val, s_val > 1.0 / lam))
    return m, sk, trace, True


class LambdaHat(NamedTuple):
    """Calibrated regularizer plus the degenerate-branch flag."""

    value: float
    degenerate: bool


def choose_lambda_hat(sk: SketchedHessian, lam: float) -> LambdaHat:
    """Root of ``s_emp(-t) = 1/lam`` on ``[5 lam/12, lam]`` by bisection.

    Degenerate cases: if ``s_emp(0) <= 1/lam`` no root exists at all (the
    sketch saw too little spectrum) and the lower bracket edge is returned;
    likewise when the root falls below the bracket.  A root above the
    bracket clamps to ``lam`` exactly, which is also the exact root for
    ``H = 0``.
    """
    if lam <= 0:
        raise ValueError(f"lam must be positive, got {lam}")
    lo = PROBE_FACTOR * lam
    hi = lam
    if empirical_stieltjes(sk, 0.0) <= 1.0 / lam:
        return LambdaHat(value=lo, degenerate=True)

    def excess(t: float) -> float:
        return empirical_stieltjes(sk, -t) - 1.0 / lam

    if excess(hi) >= 0:
        return LambdaHat(value=hi, degenerate=False)
    f_lo = excess(lo)
    if f_lo <= 0:
        return LambdaHat(value=lo, degenerate=f_lo < 0)
    for _ in range(BISECT_MAX_ITERS):
        if hi - lo <= BISECT_RTOL * lam:
            break
        mid = 0.5 * (lo + hi)
        if excess(mid) > 0:
            lo = mid
        else:
            hi = mid
    return LambdaHat(value=0.5 * (lo + hi), degenerate=False)


@dataclass(frozen=True)
class CalibrationResult:
    """Joint output of the sketch-size search and regularizer calibration."""

    m_hat: int
    lambda_hat: float
    sketched: SketchedHessian
    trace: List[MTrial] = field(repr=False)
    degenerate: bool


def calibrate(
    view: HessianView,
    lam: float,
    m0: int,
    dist: SketchDistribution,
    seed: int,
) -> CalibrationResult:
    """Run the doubling search, then calibrate the regularizer on the
    accepted sketch.  Workers in a round calibrate their own fresh sketches;
    this one-shot composition serves single-estimator uses and tests.
    """
    m_hat, sk, trace, capped = choose_m(view, lam, m0, dist, seed)
    lam_hat = choose_lambda_hat(sk, lam)
    return CalibrationResult(
        m_hat=m_hat,
        lambda_hat=lam_hat.value,
        sketched=sk,
        trace=trace,
        degenerate=capped or lam_hat.degenerate,
    )
