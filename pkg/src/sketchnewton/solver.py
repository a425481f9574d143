"""Outer Newton iterations: exact baseline and the parallel sketched variant.

The sketched iteration is ``theta <- theta - alpha * W_bar @ g`` where
``W_bar`` averages q worker estimates of the regularized inverse Hessian
(:mod:`sketchnewton.workers`) and ``alpha`` comes from backtracking line
search.  The gradient includes the ridge term; the workers sketch the
unregularized curvature and the ridge level enters only through each
worker's calibrated regularizer.  That split is load-bearing: folding the
ridge into the sketched matrix would invalidate the calibration.

Stopping combines a gradient-norm threshold with the approximate Newton
decrement ``N~^2 = g' W_bar g``, which upper-bounds the suboptimality gap
for self-concordant objectives once the decrement is small.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np

from .calibration import choose_m
from .linalg import densify, sym_eig, symmetrize
from .objectives import Objective
from .sketching import Gaussian, SketchDistribution, mix_seed
from .workers import RoundSpec, run_round

__all__ = [
    "SolverConfig",
    "IterationRecord",
    "NewtonTrace",
    "line_search",
    "exact_newton_step",
    "exact_newton_solve",
    "sketched_newton_solve",
    "eta_accuracy",
]

POLICY_ONCE = "once"
POLICY_EVERY_ROUND = "every_round"
POLICY_AUTO = "auto"


@dataclass(frozen=True)
class SolverConfig:
    """Line-search, stopping, and worker-pool parameters.

    ``a``/``b`` are the standard backtracking parameters (sufficient
    decrease fraction and step shrink factor).  ``calibration_policy``
    may be "once", "every_round", or "auto" (= once for objectives with a
    constant Hessian, every round otherwise).
    """

    a: float = 0.1
    b: float = 0.5
    max_iters: int = 100
    grad_tol: float = 1e-10
    decrement_tol: float = 1e-14
    max_linesearch_steps: int = 60
    calibration_policy: str = POLICY_AUTO
    q: int = 10
    dist: SketchDistribution = Gaussian()
    m0: int = 10
    master_seed: int = 0
    debias: bool = True
    max_parallel: Optional[int] = None

    def __post_init__(self):
        if not (0.0 < self.a < 1.0 and 0.0 < self.b < 1.0):
            raise ValueError(f"line-search parameters must lie in (0,1), got a={self.a}, b={self.b}")
        if self.calibration_policy not in (POLICY_ONCE, POLICY_EVERY_ROUND, POLICY_AUTO):
            raise ValueError(f"unknown calibration policy {self.calibration_policy!r}")


@dataclass(frozen=True)
class IterationRecord:
    t: int
    value: float
    grad_norm: float
    step_size: float
    decrement: float
    m_hat: int
    mean_lambda_hat: float
    wall_time: float


@dataclass
class NewtonTrace:
    """Per-iteration history of one solve."""

    initial_value: float
    records: List[IterationRecord] = field(default_factory=list)
    converged: bool = False
    stop_reason: str = "max_iters"
    linesearch_failures: int = 0
    calibration_time: float = 0.0

    @property
    def iterations(self) -> int:
        return len(self.records)

    def values(self) -> np.ndarray:
        return np.array([self.initial_value] + [r.value for r in self.records])


def line_search(
    objective: Objective,
    theta: np.ndarray,
    g: np.ndarray,
    direction: np.ndarray,
    cfg: SolverConfig,
) -> Tuple[float, bool]:
    """Largest ``alpha`` in ``{1, b, b^2, ...}`` passing the sufficient
    decrease test ``G(theta - alpha p) <= G(theta) - a * alpha * g'p``.

    Non-finite probe values shrink the step and continue; if every probe is
    non-finite the search raises.  Returns ``(alpha, ok)`` where ``ok`` is
    False when the step budget ran out.
    """
    g_dot_p = float(g @ direction)
    if g_dot_p < 0:
        raise ValueError(f"not a descent direction: g'p = {g_dot_p:.3e} < 0")
    base = objective.value(theta)
    alpha = 1.0
    any_finite = False
    for _ in range(cfg.max_linesearch_steps):
        probe = objective.value(theta - alpha * direction)
        if np.isfinite(probe):
            any_finite = True
            if probe <= base - cfg.a * alpha * g_dot_p:
                return alpha, True
        alpha *= cfg.b
    if not any_finite:
        raise RuntimeError("line search saw only non-finite objective values")
    return alpha / cfg.b, False


def _regularized_hessian(objective: Objective, theta: np.ndarray) -> np.ndarray:
    h = densify(objective.hessian(theta)).copy()
    h[np.diag_indices_from(h)] += objective.ridge_lambda
    return h


def exact_newton_step(
    objective: Objective,
    theta: np.ndarray,
    cfg: Optional[SolverConfig] = None,
) -> Tuple[np.ndarray, float, float]:
    """One damped Newton step with a dense solve of the regularized system.

    Returns ``(theta_next, decrement, alpha)`` with the decrement
    ``sqrt(g' (H + lam I)^{-1} g)``.
    """
    cfg = cfg or SolverConfig()
    g = objective.gradient(theta)
    h = _regularized_hessian(objective, theta)
    try:
        direction = np.linalg.solve(h, g)
    except np.linalg.LinAlgError as exc:
        raise RuntimeError(f"Newton system factorization failed: {exc}") from exc
    decrement = float(np.sqrt(max(g @ direction, 0.0)))
    alpha, _ = line_search(objective, theta, g, direction, cfg)
    return theta - alpha * direction, decrement, alpha


def exact_newton_solve(
    objective: Objective,
    theta0: np.ndarray,
    grad_tol: float = 1e-12,
    max_iters: int = 100,
    cfg: Optional[SolverConfig] = None,
) -> Tuple[np.ndarray, NewtonTrace]:
    """Exact Newton with backtracking, run to a gradient-norm tolerance."""
    cfg = cfg or SolverConfig()
    theta = np.asarray(theta0, dtype=float).copy()
    trace = NewtonTrace(initial_value=objective.value(theta))
    for t in range(1, max_iters + 1):
        start = time.perf_counter()
        g = objective.gradient(theta)
        grad_norm = float(np.linalg.norm(g))
        if grad_norm <= grad_tol:
            trace.converged = True
            trace.stop_reason = "grad_tol"
            return theta, trace
        theta, decrement, alpha = exact_newton_step(objective, theta, cfg)
        trace.records.append(
            IterationRecord(
                t=t,
                value=objective.value(theta),
                grad_norm=grad_norm,
                step_size=alpha,
                decrement=decrement,
                m_hat=0,
                mean_lambda_hat=objective.ridge_lambda,
                wall_time=time.perf_counter() - start,
            )
        )
        if decrement * decrement <= 2.0 * cfg.decrement_tol:
            trace.converged = True
            trace.stop_reason = "decrement_tol"
            return theta, trace
    return theta, trace


def _policy(objective: Objective, cfg: SolverConfig) -> str:
    if cfg.calibration_policy != POLICY_AUTO:
        return cfg.calibration_policy
    return POLICY_ONCE if objective.constant_hessian else POLICY_EVERY_ROUND


def sketched_newton_solve(
    objective: Objective,
    theta0: np.ndarray,
    cfg: SolverConfig,
) -> Tuple[np.ndarray, NewtonTrace]:
    """Parallel sketched Newton: per-round server calibration of the sketch
    size, q worker estimates, averaged direction, backtracking step.

    Under the every-round policy the doubling search restarts from the
    previous size, so the broadcast ``m`` never shrinks along the run.
    """
    theta = np.asarray(theta0, dtype=float).copy()
    policy = _policy(objective, cfg)
    trace = NewtonTrace(initial_value=objective.value(theta))
    m_hat: Optional[int] = None
    for t in range(1, cfg.max_iters + 1):
        start = time.perf_counter()
        g = objective.gradient(theta)
        grad_norm = float(np.linalg.norm(g))
        if grad_norm <= cfg.grad_tol:
            trace.converged = True
            trace.stop_reason = "grad_tol"
            return theta, trace
        hessian = objective.hessian(theta)
        if m_hat is None or policy == POLICY_EVERY_ROUND:
            start_m = cfg.m0 if m_hat is None else m_hat
            calib_start = time.perf_counter()
            # server stream: worker index 0 is reserved for calibration
            m_hat, _, _, _ = choose_m(
                hessian, objective.ridge_lambda, start_m, cfg.dist, mix_seed(cfg.master_seed, t, 0)
            )
            trace.calibration_time += time.perf_counter() - calib_start
        round_result = run_round(
            RoundSpec(
                round_index=t,
                gradient=g,
                hessian=hessian,
                ridge_lambda=objective.ridge_lambda,
                m=m_hat,
                dist=cfg.dist,
                q=cfg.q,
                master_seed=cfg.master_seed,
                debias=cfg.debias,
                max_parallel=cfg.max_parallel,
            )
        )
        direction = round_result.direction
        decrement_sq = max(float(g @ direction), 0.0)
        if decrement_sq <= 2.0 * cfg.decrement_tol:
            trace.converged = True
            trace.stop_reason = "decrement_tol"
            return theta, trace
        alpha, ok = line_search(objective, theta, g, direction, cfg)
        if not ok:
            trace.linesearch_failures += 1
        theta = theta - alpha * direction
        trace.records.append(
            IterationRecord(
                t=t,
                value=objective.value(theta),
                grad_norm=grad_norm,
                step_size=alpha,
                decrement=float(np.sqrt(decrement_sq)),
                m_hat=m_hat,
                mean_lambda_hat=float(np.mean(round_result.per_worker_lambda_hat)),
                wall_time=time.perf_counter() - start,
            )
        )
    return theta, trace


def eta_accuracy(objective: Objective, theta: np.ndarray, w_bar: np.ndarray) -> float:
    """Spectral norm of ``(H+lam I)^{1/2} W_bar (H+lam I)^{1/2} - I``.

    Diagnostics-only measure of how accurately ``w_bar`` inverts the
    regularized Hessian; densifies, so keep ``d`` moderate.
    """
    h = _regularized_hessian(objective, theta)
    decomp = sym_eig(h)
    root = (decomp.eigenvectors * np.sqrt(np.maximum(decomp.eigenvalues, 0.0))) @ decomp.eigenvectors.T
    err = symmetrize(root @ w_bar @ root)
    err[np.diag_indices_from(err)] -= 1.0
    w = np.linalg.eigvalsh(err)
    return float(max(abs(w[0]), abs(w[-1])))
