"""Command-line front door for the calibration and solver experiments.

Subcommands
-----------
table1      success rate of the adaptive sketch-size search on power-law spectra
solve       run the parallel sketched Newton solver (plus baselines) on a task
bias-curve  corrected vs uncorrected estimator bias over a sweep of sketch sizes
det-equiv   Monte Carlo check of the deterministic-equivalent oracle
wishart     zero-curvature scaling of the averaged estimator error

Options resolve in three layers: built-in defaults, then a flat
``key = value`` config file (``--config``), then explicit command-line
flags.  All outputs are CSV files with fixed headers and are byte-identical
across reruns with the same seed; the ``solve`` command additionally writes
a JSON run summary (the only place wall-clock timings appear).
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
import time
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import calibration, data, diagnostics
from .data import haar_columns
from .linalg import DiagonalHessian, densify
from .objectives import logistic_objective, quadratic_objective, ridge_objective
from .sketching import mix_seed, parse_distribution
from .solver import SolverConfig, exact_newton_solve, sketched_newton_solve

TABLE1_HEADER = ["alpha", "sketch", "trial", "d_eff", "m_hat", "success"]
SOLVE_HEADER = [
    "method",
    "iteration",
    "value",
    "gap",
    "grad_norm",
    "step_size",
    "decrement",
    "m_hat",
    "mean_lambda_hat",
]
BIAS_HEADER = ["ensemble", "m", "q", "trial", "variant", "proxy"]
DETEQ_HEADER = ["m", "d", "z", "trials", "quantity", "empirical", "oracle", "deviation", "budget"]
WISHART_HEADER = ["d", "m", "q", "trial", "error", "reference"]

SKETCH_CHOICES = ("gaussian", "rademacher", "sparse-rademacher")
SKETCH_SHORT = {"gaussian": "G", "rademacher": "R", "sparse-rademacher": "SR"}


def parse_config(path) -> dict:
    """Flat ``key = value`` file; '#' starts a comment; keys use underscores."""
    values = {}
    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected 'key = value', got {line!r}")
            key, _, val = line.partition("=")
            values[key.strip()] = val.strip()
    return values


class _Options:
    """Layered option lookup: CLI flag > config file > default."""

    def __init__(self, args: argparse.Namespace):
        self.args = args
        self.config = parse_config(args.config) if getattr(args, "config", None) else {}

    def get(self, name: str, default, cast=None):
        cli_value = getattr(self.args, name, None)
        if cli_value is not None:
            return cli_value
        if name in self.config:
            raw = self.config[name]
            if cast is bool:
                return raw.lower() in ("1", "true", "yes")
            return cast(raw) if cast else raw
        return default


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--seed", type=int, default=None, help="master seed (default 0)")
    parser.add_argument("--output", type=str, default=None, help="output CSV path")
    parser.add_argument("--config", type=str, default=None, help="flat key=value config file")
    parser.add_argument(
        "--scale",
        action="store_true",
        help="CI scale: shrink default problem sizes (explicit size flags still win)",
    )
    parser.add_argument(
        "--sketch",
        choices=SKETCH_CHOICES,
        default=None,
        help="sketch distribution (default gaussian)",
    )
    parser.add_argument("--q", type=int, default=None, help="number of workers")
    parser.add_argument("--m0", type=int, default=None, help="initial sketch size (default 10)")
    parser.add_argument(
        "--lambda",
        dest="lam",
        type=float,
        default=None,
        help="ridge level of the objective",
    )


def _write_csv(path, header, rows) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)


def _fmt(x) -> str:
    if isinstance(x, float):
        return f"{x:.12g}"
    return str(x)


def _derive_seed(seed: int, *parts) -> int:
    """Stable seed derivation from string/int labels (no builtin hash())."""
    acc = seed
    for part in parts:
        if isinstance(part, str):
            for ch in part:
                acc = mix_seed(acc, ord(ch))
        else:
            acc = mix_seed(acc, int(part))
    return acc


# ---------------------------------------------------------------- table1


def cmd_table1(args: argparse.Namespace) -> int:
    opts = _Options(args)
    seed = opts.get("seed", 0, int)
    m0 = opts.get("m0", 10, int)
    lam = opts.get("lam", 1.0, float)
    trials = opts.get("trials", 20, int)
    d = opts.get("d", 2000 if args.scale else 10_000, int)
    sketches = [opts.get("sketch", None)] if opts.get("sketch", None) else list(SKETCH_CHOICES)
    output = opts.get("output", "table1.csv")

    rows = []
    for alpha_name, alpha in (("1", 1.0), ("2/3", 2.0 / 3.0), ("1/2", 0.5)):
        spectrum = np.arange(1, d + 1, dtype=float) ** -alpha
        d_eff = calibration.effective_dimension(spectrum, lam)
        view = DiagonalHessian(spectrum)
        for sketch_name in sketches:
            dist = parse_distribution(sketch_name)
            for trial in range(trials):
                m_hat, _, _, _ = calibration.choose_m(
                    view, lam, m0, dist, seed=_derive_seed(seed, alpha_name, sketch_name, trial)
                )
                success = int(1.5 * d_eff <= m_hat <= max(m0, 4.0 * d_eff))
                rows.append(
                    [alpha_name, SKETCH_SHORT[sketch_name], trial, _fmt(d_eff), m_hat, success]
                )
    _write_csv(output, TABLE1_HEADER, rows)
    print(f"wrote {len(rows)} rows to {output}")
    return 0


# ----------------------------------------------------------------- solve


def _load_task(opts: _Options, args: argparse.Namespace):
    task = opts.get("task", "ridge")
    lam = opts.get("lam", 1e-3, float)
    seed = opts.get("seed", 0, int)
    n = opts.get("n", 1000 if args.scale else 2000, int)
    d = opts.get("d", 100 if args.scale else 200, int)
    path = opts.get("data", None)
    if task == "quadratic":
        rng = np.random.default_rng(seed)
        v = haar_columns(rng, d, d)
        tau = 0.95 ** np.arange(d)
        h = (v * tau) @ v.T
        b = rng.standard_normal(d)
        return quadratic_objective((h + h.T) / 2, b, lam), d, task
    if path:
        dataset = data.parse_libsvm(path, task="logistic" if task == "logistic" else None)
    elif task == "ridge":
        dataset = data.synth_ridge(n, d, seed)
    else:
        dataset = data.synth_logistic(n, d, seed)
    if task == "ridge":
        return ridge_objective(dataset, lam), dataset.dim, task
    return logistic_objective(dataset, lam), dataset.dim, task


def cmd_solve(args: argparse.Namespace) -> int:
    opts = _Options(args)
    objective, d, task = _load_task(opts, args)
    seed = opts.get("seed", 0, int)
    cfg = SolverConfig(
        q=opts.get("q", 10, int),
        m0=opts.get("m0", 10, int),
        dist=parse_distribution(opts.get("sketch", "gaussian")),
        master_seed=seed,
        max_iters=opts.get("max_iters", 100, int),
        grad_tol=opts.get("grad_tol", 1e-10, float),
        calibration_policy=opts.get("policy", "auto"),
    )
    output = opts.get("output", "solve.csv")
    theta0 = np.zeros(d)

    timings = {}
    start = time.perf_counter()
    theta_exact, exact_trace = exact_newton_solve(objective, theta0, grad_tol=1e-12)
    timings["exact"] = time.perf_counter() - start
    g_star = objective.value(theta_exact)

    runs = {"exact": exact_trace}
    start = time.perf_counter()
    _, debiased_trace = sketched_newton_solve(objective, theta0, cfg)
    timings["debiased"] = time.perf_counter() - start
    runs["debiased"] = debiased_trace
    if args.compare_uncorrected:
        start = time.perf_counter()
        _, uncorrected_trace = sketched_newton_solve(objective, theta0, replace(cfg, debias=False))
        timings["uncorrected"] = time.perf_counter() - start
        runs["uncorrected"] = uncorrected_trace

    rows = []
    summary = {
        "task": task,
        "dim": d,
        "lambda": objective.ridge_lambda,
        "seed": seed,
        "q": cfg.q,
        "m0": cfg.m0,
        "optimal_value": g_star,
        "methods": {},
    }
    for method, trace in runs.items():
        rows.append([method, 0, _fmt(trace.initial_value), _fmt(trace.initial_value - g_star), "", "", "", "", ""])
        for rec in trace.records:
            rows.append(
                [
                    method,
                    rec.t,
                    _fmt(rec.value),
                    _fmt(rec.value - g_star),
                    _fmt(rec.grad_norm),
                    _fmt(rec.step_size),
                    _fmt(rec.decrement),
                    rec.m_hat,
                    _fmt(rec.mean_lambda_hat),
                ]
            )
        summary["methods"][method] = {
            "iterations": trace.iterations,
            "final_gap": trace.values()[-1] - g_star,
            "converged": trace.converged,
            "stop_reason": trace.stop_reason,
            "total_time": timings[method],
            "server_calibration_time": trace.calibration_time,
        }
    _write_csv(output, SOLVE_HEADER, rows)
    summary_path = Path(output).with_suffix(".summary.json")
    summary_path.write_text(json.dumps(summary, indent=2, default=float) + "\n")
    print(f"wrote trace to {output} and summary to {summary_path}")
    return 0


# ------------------------------------------------------------ bias-curve


def _bias_sweep(d_eff: float, d: int) -> list:
    """Sketch sizes from 1.5*d_eff, doubling, capped at min(d, 16*d_eff).

    The first point is always emitted even when it exceeds the cap (graded
    spectra can have 1.5*d_eff > d; sketching with m > d is still well
    defined, it just stops saving work).
    """
    m = int(np.ceil(1.5 * d_eff))
    cap = min(d, int(np.ceil(16 * d_eff)))
    sweep = [m]
    while 2 * m <= cap:
        m *= 2
        sweep.append(m)
    return sweep


def cmd_bias_curve(args: argparse.Namespace) -> int:
    opts = _Options(args)
    seed = opts.get("seed", 0, int)
    d = opts.get("d", 250 if args.scale else 500, int)
    q = opts.get("q", 50, int)
    trials = opts.get("trials", 10, int)
    dist = parse_distribution(opts.get("sketch", "gaussian"))
    output = opts.get("output", "bias_curve.csv")
    ensemble = args.ensemble

    if ensemble == "exp":
        view, lam = diagnostics.exp_decay_ensemble(d, seed)
    else:
        view, lam = diagnostics.poly_decay_ensemble(d, seed)
    lam = opts.get("lam", lam, float)
    spectrum = np.linalg.eigvalsh(densify(view))
    d_eff = calibration.effective_dimension(np.clip(spectrum, 0, None), lam)
    rows = []
    for m in _bias_sweep(d_eff, d):
        corrected, uncorrected = diagnostics.bias_proxy(
            view, lam, m, q, dist, trials, _derive_seed(seed, ensemble, m)
        )
        for trial in range(trials):
            rows.append([ensemble, m, q, trial, "corrected", _fmt(float(corrected.values[trial]))])
            rows.append(
                [ensemble, m, q, trial, "uncorrected", _fmt(float(uncorrected.values[trial]))]
            )
    _write_csv(output, BIAS_HEADER, rows)
    print(f"wrote {len(rows)} rows to {output} (d_eff = {d_eff:.1f})")
    return 0


# ------------------------------------------------------------- det-equiv


def cmd_det_equiv(args: argparse.Namespace) -> int:
    opts = _Options(args)
    seed = opts.get("seed", 0, int)
    m = opts.get("m", 200 if args.scale else 400, int)
    d = opts.get("d", 400 if args.scale else 800, int)
    z = opts.get("z", -1.0, float)
    trials = opts.get("trials", 100, int)
    output = opts.get("output", "det_equiv.csv")
    alpha = opts.get("alpha", None, float)

    if alpha is None:
        spectrum = np.ones(d)
    else:
        spectrum = np.arange(1, d + 1, dtype=float) ** -alpha
    report = diagnostics.deterministic_equivalent_check(spectrum, m, z, trials, seed)
    rows = [
        [
            m,
            d,
            _fmt(z),
            trials,
            "bilinear",
            _fmt(report.mean_bilinear),
            _fmt(report.oracle_bilinear),
            _fmt(report.bilinear_deviation),
            _fmt(report.budget),
        ],
        [
            m,
            d,
            _fmt(z),
            trials,
            "stieltjes",
            _fmt(report.mean_stieltjes),
            _fmt(report.oracle_stieltjes),
            _fmt(report.stieltjes_deviation),
            _fmt(report.budget),
        ],
    ]
    _write_csv(output, DETEQ_HEADER, rows)
    status = "within" if report.within_budget else "OUTSIDE"
    print(f"wrote {output}; deviations {status} the {report.budget:.4f} budget")
    return 0


# --------------------------------------------------------------- wishart


def cmd_wishart(args: argparse.Namespace) -> int:
    opts = _Options(args)
    seed = opts.get("seed", 0, int)
    d = opts.get("d", 100 if args.scale else 200, int)
    m = opts.get("m", 25 if args.scale else 50, int)
    lam = opts.get("lam", 1.0, float)
    trials = opts.get("trials", 10, int)
    qs = [int(x) for x in opts.get("q_list", "8,16,32").split(",")]
    output = opts.get("output", "wishart.csv")

    rows = []
    for q in qs:
        report = diagnostics.wishart_error_norm(
            d, m, q, lam=lam, trials=trials, seed=_derive_seed(seed, q)
        )
        for trial in range(trials):
            rows.append([d, m, q, trial, _fmt(float(report.errors[trial])), _fmt(report.reference)])
    _write_csv(output, WISHART_HEADER, rows)
    print(f"wrote {len(rows)} rows to {output}")
    return 0


# ------------------------------------------------------------------ main


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sketchnewton",
        description=__doc__,
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("table1", help="adaptive sketch-size success rates on power-law spectra")
    _add_common(p)
    p.add_argument("--d", type=int, default=None, help="spectrum dimension (default 10000)")
    p.add_argument("--trials", type=int, default=None, help="Monte Carlo trials (default 20)")
    p.set_defaults(func=cmd_table1)

    p = sub.add_parser("solve", help="run the parallel sketched Newton solver")
    _add_common(p)
    p.add_argument("--task", choices=("ridge", "logistic", "quadratic"), default=None)
    p.add_argument("--data", type=str, default=None, help="libsvm-format input file")
    p.add_argument("--n", type=int, default=None, help="synthetic rows (default 2000)")
    p.add_argument("--d", type=int, default=None, help="synthetic columns (default 200)")
    p.add_argument("--max-iters", dest="max_iters", type=int, default=None)
    p.add_argument("--grad-tol", dest="grad_tol", type=float, default=None)
    p.add_argument("--policy", choices=("auto", "once", "every_round"), default=None)
    p.add_argument(
        "--compare-uncorrected",
        action="store_true",
        help="also run the uncalibrated (lambda_hat = lambda) variant",
    )
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("bias-curve", help="corrected vs uncorrected estimator bias sweep")
    _add_common(p)
    p.add_argument("--ensemble", choices=("exp", "poly"), default="exp")
    p.add_argument("--d", type=int, default=None, help="matrix dimension (default 500)")
    p.add_argument("--trials", type=int, default=None, help="Monte Carlo trials (default 10)")
    p.set_defaults(func=cmd_bias_curve)

    p = sub.add_parser("det-equiv", help="deterministic-equivalent Monte Carlo check")
    _add_common(p)
    p.add_argument("--m", type=int, default=None, help="sketch size (default 400)")
    p.add_argument("--d", type=int, default=None, help="dimension (default 800)")
    p.add_argument("--z", type=float, default=None, help="evaluation point < 0 (default -1)")
    p.add_argument("--trials", type=int, default=None, help="Monte Carlo trials (default 100)")
    p.add_argument("--alpha", type=float, default=None, help="power-law spectrum exponent")
    p.set_defaults(func=cmd_det_equiv)

    p = sub.add_parser("wishart", help="zero-curvature error scaling of the averaged estimator")
    _add_common(p)
    p.add_argument("--d", type=int, default=None, help="dimension (default 200)")
    p.add_argument("--m", type=int, default=None, help="sketch size (default 50)")
    p.add_argument("--q-list", dest="q_list", type=str, default=None, help="comma list of q values")
    p.add_argument("--trials", type=int, default=None, help="Monte Carlo trials (default 10)")
    p.set_defaults(func=cmd_wishart)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
