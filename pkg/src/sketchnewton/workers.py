"""Star-topology worker pool: q independent debiased estimates, averaged.

Each worker receives the broadcast sketch size, draws its own sketch with a
seed derived from ``(master_seed, round, worker)``, calibrates its own
regularizer, and returns the d-vector ``W_hat^{(k)} @ g``.  The server
averages the vectors in worker-index order, so the result is bit-identical
no matter how many threads execute the pool.

This is an in-process simulation of a function-as-a-service deployment:
worker tasks are pure and isolated, and parallelism changes wall time only.
"""

from __future__ import annotations

import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .calibration import choose_lambda_hat
from .linalg import HessianView, hessian_dim
from .sketching import (
    SketchDistribution,
    apply_debiased_inverse,
    densify_estimator,
    mix_seed,
    sample_sketch,
    sketch_hessian,
)

__all__ = ["RoundSpec", "RoundResult", "run_round", "straggler_policy", "densified_round_average"]


@dataclass(frozen=True)
class RoundSpec:
    """Everything the server broadcasts for one deployment round."""

    round_index: int
    gradient: np.ndarray
    hessian: HessianView
    ridge_lambda: float
    m: int
    dist: SketchDistribution
    q: int
    master_seed: int
    debias: bool = True
    max_parallel: Optional[int] = None

    def __post_init__(self):
        if self.q < 1:
            raise ValueError(f"worker count q must be >= 1, got {self.q}")
        if self.m < 1:
            raise ValueError(f"sketch size m must be >= 1, got {self.m}")
        d = hessian_dim(self.hessian)
        g = np.asarray(self.gradient, dtype=float)
        if g.shape != (d,):
            raise ValueError(f"gradient has shape {g.shape}, expected ({d},)")
        object.__setattr__(self, "gradient", g)


@dataclass(frozen=True)
class RoundResult:
    """Averaged direction plus per-worker calibration metadata."""

    direction: np.ndarray
    per_worker_lambda_hat: np.ndarray
    degenerate_count: int
    wall_times: np.ndarray
    dropped: int = 0


@dataclass(frozen=True)
class _WorkerOutput:
    vector: np.ndarray
    lambda_hat: float
    degenerate: bool
    wall_time: float


def _worker_seed(spec: RoundSpec, worker: int) -> int:
    # workers are 1-based so the server can reserve stream 0
    return mix_seed(spec.master_seed, spec.round_index, worker)


def _run_worker(spec: RoundSpec, worker: int) -> _WorkerOutput:
    start = time.perf_counter()
    d = hessian_dim(spec.hessian)
    sketch = sample_sketch(spec.dist, spec.m, d, _worker_seed(spec, worker))
    sk = sketch_hessian(sketch, spec.hessian)
    if spec.debias:
        lam_hat, degenerate = choose_lambda_hat(sk, spec.ridge_lambda)
    else:
        lam_hat, degenerate = spec.ridge_lambda, False
    vector = apply_debiased_inverse(sk, lam_hat, spec.gradient)
    return _WorkerOutput(
        vector=vector,
        lambda_hat=lam_hat,
        degenerate=degenerate,
        wall_time=time.perf_counter() - start,
    )


def _collect(spec: RoundSpec) -> list:
    workers = range(1, spec.q + 1)
    if spec.max_parallel == 1:
        return [_run_worker(spec, k) for k in workers]
    with ThreadPoolExecutor(max_workers=spec.max_parallel) as pool:
        return list(pool.map(lambda k: _run_worker(spec, k), workers))


def _average(spec: RoundSpec, outputs: Sequence[_WorkerOutput], keep: Sequence[bool]) -> RoundResult:
    d = hessian_dim(spec.hessian)
    acc = np.zeros(d)
    survivors = 0
    # fixed worker-index summation order: float addition is not associative
    for out, ok in zip(outputs, keep):
        if ok:
            acc += out.vector
            survivors += 1
    if survivors == 0:
        raise RuntimeError("all workers dropped; no direction available")
    return RoundResult(
        direction=acc / survivors,
        per_worker_lambda_hat=np.array([o.lambda_hat for o in outputs]),
        degenerate_count=sum(o.degenerate for o in outputs),
        wall_times=np.array([o.wall_time for o in outputs]),
        dropped=spec.q - survivors,
    )


def run_round(spec: RoundSpec) -> RoundResult:
    """Execute one round; workers producing non-finite vectors are dropped."""
    outputs = _collect(spec)
    keep = [bool(np.all(np.isfinite(o.vector))) for o in outputs]
    return _average(spec, outputs, keep)


def straggler_policy(
    spec: RoundSpec,
    timeout: float,
    delays: Optional[Sequence[float]] = None,
) -> RoundResult:
    """Average only the workers that finish within ``timeout`` seconds.

    ``delays`` adds simulated per-worker latency on top of the measured
    compute time (the FaaS failure model); the average is renormalized by
    the survivor count.
    """
    if timeout <= 0:
        raise ValueError(f"timeout must be positive, got {timeout}")
    if delays is not None and len(delays) != spec.q:
        raise ValueError(f"need {spec.q} delays, got {len(delays)}")
    outputs = _collect(spec)
    keep = []
    for k, out in enumerate(outputs):
        elapsed = out.wall_time + (delays[k] if delays is not None else 0.0)
        keep.append(elapsed <= timeout and bool(np.all(np.isfinite(out.vector))))
    return _average(spec, outputs, keep)


def densified_round_average(spec: RoundSpec) -> tuple[np.ndarray, RoundResult]:
    """Materialize the averaged estimator ``W_bar`` for the same worker
    sketches and regularizers that :func:`run_round` would use.

    Diagnostics-only: costs O(q d^2 m) and a dense ``(d, d)`` accumulator.
    """
    d = hessian_dim(spec.hessian)
    acc = np.zeros((d, d))
    lam_hats = []
    degenerate = 0
    for k in range(1, spec.q + 1):
        sketch = sample_sketch(spec.dist, spec.m, d, _worker_seed(spec, k))
        sk = sketch_hessian(sketch, spec.hessian)
        if spec.debias:
            lam_hat, degen = choose_lambda_hat(sk, spec.ridge_lambda)
        else:
            lam_hat, degen = spec.ridge_lambda, False
        acc += densify_estimator(sk, lam_hat)
        lam_hats.append(lam_hat)
        degenerate += degen
    w_bar = acc / spec.q
    result = RoundResult(
        direction=w_bar @ spec.gradient,
        per_worker_lambda_hat=np.array(lam_hats),
        degenerate_count=degenerate,
        wall_times=np.full(spec.q, math.nan),
    )
    return w_bar, result
