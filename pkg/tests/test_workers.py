"""Worker-pool tests: determinism, averaging semantics, straggler handling,
and concentration of the averaged estimator."""

import numpy as np
import pytest

from sketchnewton.calibration import choose_lambda_hat, effective_dimension
from sketchnewton.linalg import DenseHessian, DiagonalHessian, sym_eig, symmetrize
from sketchnewton.sketching import (
    Gaussian,
    apply_debiased_inverse,
    mix_seed,
    sample_sketch,
    sketch_hessian,
)
from sketchnewton.workers import (
    RoundSpec,
    densified_round_average,
    run_round,
    straggler_policy,
)


def small_spec(q=4, d=20, m=10, seed=7, **overrides):
    rng = np.random.default_rng(seed)
    a = rng.standard_normal((d, d))
    base = dict(
        round_index=3,
        gradient=rng.standard_normal(d),
        hessian=DenseHessian(symmetrize(a @ a.T) / d),
        ridge_lambda=0.5,
        m=m,
        dist=Gaussian(),
        q=q,
        master_seed=seed,
    )
    base.update(overrides)
    return RoundSpec(**base)


class TestRunRound:
    def test_single_worker_matches_direct_computation(self):
        spec = small_spec(q=1)
        result = run_round(spec)
        sketch = sample_sketch(spec.dist, spec.m, 20, mix_seed(spec.master_seed, spec.round_index, 1))
        sk = sketch_hessian(sketch, spec.hessian)
        lam_hat, _ = choose_lambda_hat(sk, spec.ridge_lambda)
        expected = apply_debiased_inverse(sk, lam_hat, spec.gradient)
        assert np.array_equal(result.direction, expected)
        assert result.per_worker_lambda_hat[0] == lam_hat

    @pytest.mark.parametrize("max_parallel", [1, 2, 8])
    def test_bit_identical_across_thread_counts(self, max_parallel):
        reference = run_round(small_spec(q=6))
        result = run_round(small_spec(q=6, max_parallel=max_parallel))
        assert np.array_equal(result.direction, reference.direction)
        assert np.array_equal(result.per_worker_lambda_hat, reference.per_worker_lambda_hat)

    def test_repeat_runs_bit_identical(self):
        a = run_round(small_spec())
        b = run_round(small_spec())
        assert np.array_equal(a.direction, b.direction)

    def test_averaging_is_linear_in_gradient(self):
        rng = np.random.default_rng(0)
        g1, g2 = rng.standard_normal(20), rng.standard_normal(20)
        r1 = run_round(small_spec(gradient=g1))
        r2 = run_round(small_spec(gradient=g2))
        r12 = run_round(small_spec(gradient=g1 + g2))
        combined = r1.direction + r2.direction
        assert np.linalg.norm(r12.direction - combined) <= 1e-10 * np.linalg.norm(combined)

    def test_zero_curvature_average_approaches_identity(self):
        # H = 0: direction ~ g with ||W_bar - I|| ~ sqrt(d/(m q))
        d, m, q = 60, 30, 16
        rng = np.random.default_rng(1)
        g = rng.standard_normal(d)
        spec = small_spec(q=q, d=d, m=m, hessian=DiagonalHessian(np.zeros(d)), gradient=g, ridge_lambda=1.0)
        result = run_round(spec)
        rate = max(d / (m * q), np.sqrt(d / (m * q)))
        assert np.linalg.norm(result.direction - g) <= 3.0 * rate * np.linalg.norm(g)

    def test_validates_dimensions(self):
        with pytest.raises(ValueError):
            small_spec(q=0)
        with pytest.raises(ValueError):
            small_spec(gradient=np.ones(3))

    def test_nonfinite_workers_are_dropped(self, monkeypatch):
        import sketchnewton.workers as workers_mod

        real_worker = workers_mod._run_worker

        def sabotaged(spec, worker):
            out = real_worker(spec, worker)
            if worker == 2:
                bad = out.vector.copy()
                bad[0] = np.nan
                return workers_mod._WorkerOutput(bad, out.lambda_hat, out.degenerate, out.wall_time)
            return out

        monkeypatch.setattr(workers_mod, "_run_worker", sabotaged)
        spec = small_spec(q=3, max_parallel=1)
        result = workers_mod.run_round(spec)
        assert result.dropped == 1
        survivors = [real_worker(spec, k).vector for k in (1, 3)]
        assert np.allclose(result.direction, (survivors[0] + survivors[1]) / 2)

    def test_all_nonfinite_raises(self, monkeypatch):
        import sketchnewton.workers as workers_mod

        def broken(spec, worker):
            d = 20
            return workers_mod._WorkerOutput(np.full(d, np.nan), 1.0, False, 0.0)

        monkeypatch.setattr(workers_mod, "_run_worker", broken)
        with pytest.raises(RuntimeError):
            workers_mod.run_round(small_spec(q=2, max_parallel=1))

    def test_degenerate_workers_counted_but_kept(self):
        # every gram eigenvalue ~ 10 > lam = 1: s_emp(0) <= 1/lam for all workers
        d = 15
        spec = small_spec(q=3, d=d, m=20, hessian=DiagonalHessian(np.full(d, 10.0)), ridge_lambda=1.0)
        result = run_round(spec)
        assert result.degenerate_count == 3
        assert result.dropped == 0
        assert np.all(result.per_worker_lambda_hat == pytest.approx(5.0 / 12.0))


class TestStragglerPolicy:
    def test_infinite_timeout_matches_run_round(self):
        spec = small_spec(q=5)
        full = run_round(spec)
        lazy = straggler_policy(spec, timeout=np.inf)
        assert np.array_equal(full.direction, lazy.direction)
        assert lazy.dropped == 0

    def test_dropping_one_of_two_keeps_survivor(self):
        spec = small_spec(q=2)
        slow_second = straggler_policy(spec, timeout=1e3, delays=[0.0, 1e6])
        solo = run_round(small_spec(q=1))
        assert slow_second.dropped == 1
        assert np.array_equal(slow_second.direction, solo.direction)

    def test_all_dropped_raises(self):
        spec = small_spec(q=2)
        with pytest.raises(RuntimeError):
            straggler_policy(spec, timeout=1.0, delays=[1e6, 1e6])

    def test_random_drops_leave_mean_unchanged(self):
        # E[mean of a uniformly random surviving subset] = E[full average]:
        # same problem every trial, fresh worker randomness and drops
        d, q, trials = 12, 6, 200
        rng = np.random.default_rng(5)
        diffs = np.zeros((trials, d))
        for trial in range(trials):
            spec = small_spec(q=q, d=d, m=8, master_seed=mix_seed(100, trial))
            full = run_round(spec)
            delays = np.where(rng.random(q) < 0.4, 1e9, 0.0)
            if np.all(delays > 0):
                delays[rng.integers(q)] = 0.0
            survived = straggler_policy(spec, timeout=1e3, delays=delays)
            diffs[trial] = full.direction - survived.direction
        mean_diff = diffs.mean(axis=0)
        stderr = diffs.std(axis=0, ddof=1) / np.sqrt(trials)
        assert np.linalg.norm(mean_diff) <= 5.0 * np.linalg.norm(stderr)


class TestDensifiedAverage:
    def test_matches_run_round_direction(self):
        spec = small_spec(q=3)
        w_bar, result = densified_round_average(spec)
        reference = run_round(spec)
        assert np.allclose(result.direction, reference.direction, rtol=1e-10, atol=1e-12)
        assert np.array_equal(result.per_worker_lambda_hat, reference.per_worker_lambda_hat)

    def test_error_matrix_norm_shrinks_with_workers(self):
        # whitened error ||(H + lam I)^1/2 W_bar (H + lam I)^1/2 - I||, median
        # over seeds, is non-increasing as q grows (power-law spectrum)
        d = 500
        spec_eigs = np.arange(1, d + 1, dtype=float) ** (-2.0 / 3.0)
        lam = 1.0
        d_eff = effective_dimension(spec_eigs, lam)
        m = int(np.ceil(4 * d_eff))
        view = DiagonalHessian(spec_eigs)
        whitener = np.sqrt(spec_eigs + lam)
        medians = []
        for q in (1, 4, 16, 64):
            errors = []
            for seed in range(10):
                round_spec = RoundSpec(
                    round_index=1,
                    gradient=np.zeros(d),
                    hessian=view,
                    ridge_lambda=lam,
                    m=m,
                    dist=Gaussian(),
                    q=q,
                    master_seed=mix_seed(q, seed),
                )
                w_bar, _ = densified_round_average(round_spec)
                err = whitener[:, None] * w_bar * whitener[None, :]
                err[np.diag_indices_from(err)] -= 1.0
                w = np.linalg.eigvalsh(symmetrize(err))
                errors.append(max(abs(w[0]), abs(w[-1])))
            medians.append(np.median(errors))
        assert all(a >= b for a, b in zip(medians, medians[1:]))
