"""Parallel Newton's method with calibrated, debiased inverse-Hessian sketching.

Workers compress the curvature matrix with small random sketches, calibrate
a modified regularizer from the sketched spectrum alone, and send debiased
Newton-direction estimates to a server that averages them and runs damped
Newton iterations.
"""

from .calibration import (
    CalibrationResult,
    calibrate,
    choose_lambda_hat,
    choose_m,
    effective_dimension,
    empirical_stieltjes,
    mp_psi,
    mp_stieltjes_oracle,
    oracle_lambda_tilde,
    test_sketch_dim,
)
from .linalg import (
    DenseHessian,
    DiagonalHessian,
    FactoredHessian,
    SpectralDecomposition,
    densify,
    hessian_matvec,
    shifted_solve,
    sym_eig,
    symmetrize,
)
from .objectives import (
    Dataset,
    Objective,
    logistic_objective,
    quadratic_objective,
    ridge_objective,
)
from .sketching import (
    Gaussian,
    Rademacher,
    SketchSample,
    SketchedHessian,
    SparseRademacher,
    apply_debiased_inverse,
    densify_estimator,
    mix_seed,
    sample_sketch,
    sketch_hessian,
)
from .solver import (
    SolverConfig,
    NewtonTrace,
    eta_accuracy,
    exact_newton_solve,
    exact_newton_step,
    line_search,
    sketched_newton_solve,
)
from .workers import RoundResult, RoundSpec, run_round, straggler_policy

__version__ = "0.1.0"
