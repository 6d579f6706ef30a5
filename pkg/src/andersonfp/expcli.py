"""Command-line experiment runner.

Each experiment writes plot-ready CSV tables plus ``summary.json`` into the
output directory and exits with status 0 iff no invariant was violated.

    andersonfp --experiment linear-bound --seed-count 100 --out results/bound
    andersonfp --experiment tme-run --model model2 --method fp,aa1,aa2,aa3
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import logging
import math
import re
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .aacore import AAConfig, Diverged, Infeasible, aa_solve, fp_iterate, reformulated_aa_linear
from .datagen import DataModelSpec, SeededStream
from .operators import W1_DIAGONAL, LinearSymmetricOperator, make_diag_operator, make_random_symmetric
from .theory import (PAIR_SLACK, check_pairwise_bound, check_ratio_bound, compute_w0,
                     estimate_r_factor, make_tight_init_scalar, spectrum_of)
from .tyler import (deflated_tme_spectrum, jacobian_fd, log_operator, sigma_from_w, solve_reference,
                    standard_operator, symmetry_defect, tme_log_step, tme_standard_step)

log = logging.getLogger("andersonfp")

EXPERIMENTS = ("linear-bound", "linear-rate", "scalar-tight", "tme-run", "tme-jacobian",
               "tme-compare", "w0-table")

BOUND_FIELDS = ["seed", "method", "k", "lhs", "rhs", "satisfied", "floor"]
RATE_FIELDS = ["seed", "method", "k", "error_norm", "r_est"]
TME_FIELDS = ["seed", "init", "method", "iterations", "wall_clock_s", "final_residual", "r_est_tail"]
W0_FIELDS = ["lambda_min", "lambda_max", "w0", "op_norm", "rate_bound", "equality_flag"]

RATE_SLACK = 0.02
TME_RATIO_SLACK = 1.05
TME_RATIO_START = 1e-4


@dataclass
class ExperimentConfig:
    experiment: str
    methods: list[str] = field(default_factory=lambda: ["aa1", "aa2", "aa3"])
    seeds: list[int] = field(default_factory=lambda: list(range(10)))
    tol: float = 1e-12
    max_iterations: int = 100_000
    c0: float = math.inf
    beta: float = 1.0
    out: str | None = None
    # linear operators: an explicit diagonal, or a random symmetric matrix
    diagonal: list[float] | None = None
    n: int = 100
    eig_low: float = -0.9
    eig_high: float = 0.9
    forced_min_eig: float | None = -0.95
    operator_seed: int = 0
    # Tyler problems
    model: str = "model1"
    p: int = 20
    n_samples: int = 40
    n0: int = 60
    n1: int = 57
    D: int = 20
    d: int = 10
    inits: int = 10
    steps: int = 100
    # scalar-tight / w0-table
    w: float = 0.5
    grid_points: int = 50
    grid_limit: float = 0.95

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            raise ValueError(f"unknown experiment {self.experiment!r}")
        if not self.methods:
            raise ValueError("at least one method is required")
        for m in self.methods:
            parse_method(m)
        if self.experiment not in ("w0-table", "scalar-tight") and not self.seeds:
            raise ValueError("seed list is empty")


def parse_method(name: str) -> int:
    """Depth of an ``aaM`` method, 0 for ``fp``."""
    if name == "fp":
        return 0
    match = re.fullmatch(r"aa(\d+)", name)
    if not match or int(match.group(1)) < 1:
        raise ValueError(f"unknown method {name!r}; expected fp or aa<m>")
    return int(match.group(1))


def _aa_config(cfg: ExperimentConfig, m: int) -> AAConfig:
    return AAConfig(m=m, c0=cfg.c0, beta=cfg.beta, residual_tol=cfg.tol,
                    max_iterations=cfg.max_iterations)


def _init_seed(seed: int, init: int) -> int:
    return (seed << 20) + init + 1


@dataclass
class ExperimentReport:
    tables: dict[str, tuple[list[str], list[dict]]] = field(default_factory=dict)
    summary: dict = field(default_factory=dict)
    violations: int = 0

    def write(self, out: str | Path) -> None:
        out = Path(out)
        out.mkdir(parents=True, exist_ok=True)
        for name, (fields, rows) in self.tables.items():
            with open(out / f"{name}.csv", "w", newline="") as fh:
                writer = csv.DictWriter(fh, fieldnames=fields, lineterminator="\n")
                writer.writeheader()
                for row in rows:
                    writer.writerow({k: _fmt(row[k]) for k in fields})
        with open(out / "summary.json", "w") as fh:
            json.dump(_jsonable(self.summary), fh, indent=2, sort_keys=True)
            fh.write("\n")


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return v


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else str(v)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def _linear_operator(cfg: ExperimentConfig) -> LinearSymmetricOperator:
    if cfg.diagonal is not None:
        return make_diag_operator(cfg.diagonal)
    return make_random_symmetric(cfg.n, cfg.eig_low, cfg.eig_high, cfg.forced_min_eig,
                                 seed=cfg.operator_seed)


def run_linear_bound(cfg: ExperimentConfig) -> ExperimentReport:
    """Two-step bound table for AA(m) on a linear symmetric operator."""
    if "fp" in cfg.methods:
        raise ValueError("linear-bound applies to AA methods only")
    op = _linear_operator(cfg)
    # damped AA iterates the operator beta*q + (1-beta)*I
    checked = op.damped(cfg.beta) if cfg.beta < 1.0 else op
    spec = spectrum_of(checked.W)
    report = ExperimentReport()
    rows, per_method = [], {}
    for seed in cfg.seeds:
        x0 = SeededStream(seed).normal(op.dimension)
        for method in cfg.methods:
            trace = aa_solve(op, x0, _aa_config(cfg, parse_method(method)))
            stats = per_method.setdefault(method, {"rows": 0, "violations": 0, "max_ratio": 0.0,
                                                   "min_gap": math.inf, "iterations": []})
            stats["iterations"].append(trace.iterations)
            for r in check_pairwise_bound(trace, checked.W, checked.a):
                rows.append({"seed": seed, "method": method, "k": r.k, "lhs": r.lhs, "rhs": r.rhs,
                             "satisfied": r.satisfied, "floor": r.floor})
                stats["rows"] += 1
                if not r.satisfied:
                    stats["violations"] += 1
                if not r.floor:
                    stats["max_ratio"] = max(stats["max_ratio"], r.lhs / r.rhs)
                    stats["min_gap"] = min(stats["min_gap"], r.rhs - r.lhs)
    for stats in per_method.values():
        its = stats.pop("iterations")
        stats["median_iterations"] = float(np.median(its))
        stats["min_relative_gap"] = 1.0 - stats["max_ratio"]
    report.tables["bound"] = (BOUND_FIELDS, rows)
    report.violations = sum(s["violations"] for s in per_method.values())
    report.summary = {"experiment": cfg.experiment, "spectrum": dataclasses.asdict(spec),
                      "pair_bound": spec.pair_bound, "slack": PAIR_SLACK, "beta": cfg.beta,
                      "methods": per_method, "violations": report.violations}
    return report


def run_linear_rate(cfg: ExperimentConfig) -> ExperimentReport:
    """r-factor estimates of FP and AA(m) against sqrt(w0 ||W||) and ||W||."""
    op = _linear_operator(cfg)
    spec = spectrum_of(op.W)
    x_star = op.fixed_point()
    report = ExperimentReport()
    rows, tails, wall = [], {m: [] for m in cfg.methods}, {m: [] for m in cfg.methods}
    for seed in cfg.seeds:
        x0 = SeededStream(seed).normal(op.dimension)
        for method in cfg.methods:
            m = parse_method(method)
            start = time.perf_counter()
            if m == 0:
                trace = fp_iterate(op, x0, cfg.tol, cfg.max_iterations)
            else:
                trace = aa_solve(op, x0, _aa_config(cfg, m))
            wall[method].append(time.perf_counter() - start)
            errors = np.linalg.norm(trace.iterates[1:] - x_star, axis=1)
            if errors.size == 0:
                tails[method].append(0.0)
                continue
            r_est = estimate_r_factor(errors)
            tails[method].append(float(r_est[-1]))
            for k, (e, r) in enumerate(zip(errors, r_est), start=1):
                rows.append({"seed": seed, "method": method, "k": k, "error_norm": e, "r_est": r})
    violations = 0
    per_method = {}
    for method, vals in tails.items():
        vals = np.array(vals)
        above = int(np.sum(vals > spec.rate_bound + RATE_SLACK)) if method != "fp" else 0
        violations += above
        per_method[method] = {"median_tail": float(np.median(vals)), "min_tail": float(vals.min()),
                              "max_tail": float(vals.max()), "above_rate_bound": above,
                              "wall_clock_s": float(np.sum(wall[method]))}
    report.tables["rate"] = (RATE_FIELDS, rows)
    report.violations = violations
    report.summary = {"experiment": cfg.experiment, "spectrum": dataclasses.asdict(spec),
                      "rate_bound": spec.rate_bound, "op_norm": spec.op_norm,
                      "methods": per_method, "violations": violations}
    return report


def run_scalar_tight(cfg: ExperimentConfig) -> ExperimentReport:
    """AA(1) on W = w I from the tight initialisation; every two-step ratio equals w^2/(2-w)."""
    w = cfg.w
    x0, x1 = make_tight_init_scalar(w)
    norms = reformulated_aa_linear(w * np.eye(2), x0, x1, 1, cfg.steps)
    expected = w * w / (2.0 - w)
    rows = []
    worst = 0.0
    for k in range(2, len(norms) - 1):
        ratio = norms[k + 1] / norms[k - 1]
        worst = max(worst, abs(ratio - expected))
        rows.append({"k": k, "ratio": ratio, "expected": expected})
    report = ExperimentReport()
    report.tables["scalar_tight"] = (["k", "ratio", "expected"], rows)
    report.violations = int(worst > 1e-8)
    report.summary = {"experiment": cfg.experiment, "w": w, "expected_ratio": expected,
                      "max_abs_deviation": worst, "violations": report.violations}
    return report


def _tyler_problem(cfg: ExperimentConfig, seed: int):
    if cfg.model == "model1":
        spec = DataModelSpec("model1", seed, p=cfg.p, n=cfg.n_samples)
    else:
        spec = DataModelSpec("model2", seed, n0=cfg.n0, n1=cfg.n1, D=cfg.D, d=cfg.d)
    return spec.generate()


def run_tme(cfg: ExperimentConfig) -> ExperimentReport:
    """FP on the shape iteration against AA(m) on the log-weight iteration."""
    report = ExperimentReport()
    rows, bound_rows, failures, spectra = [], [], [], {}
    iterations = {m: [] for m in cfg.methods}
    wall = {m: [] for m in cfg.methods}
    for seed in cfg.seeds:
        prob = _tyler_problem(cfg, seed)
        ref = solve_reference(prob)
        spec = deflated_tme_spectrum(jacobian_fd(lambda w: tme_log_step(w, prob), ref.w))
        spectra[seed] = {**dataclasses.asdict(spec), "pair_bound": spec.pair_bound,
                         "reference_residual": ref.residual}
        for init in range(cfg.inits):
            w0 = SeededStream(_init_seed(seed, init)).normal(prob.n)
            for method in cfg.methods:
                m = parse_method(method)
                try:
                    start = time.perf_counter()
                    if m == 0:
                        S0 = sigma_from_w(w0, prob, normalize=True)
                        trace = fp_iterate(standard_operator(prob), S0.ravel(), cfg.tol,
                                           cfg.max_iterations)
                        elapsed = time.perf_counter() - start
                        sigmas = trace.iterates.reshape(-1, prob.p, prob.p)
                    else:
                        trace = aa_solve(log_operator(prob), w0, _aa_config(cfg, m))
                        elapsed = time.perf_counter() - start
                        sigmas = np.array([sigma_from_w(x, prob, normalize=True)
                                           for x in trace.iterates])
                except (np.linalg.LinAlgError, ArithmeticError, Diverged, Infeasible) as exc:
                    failures.append({"seed": seed, "init": init, "method": method,
                                     "error": str(exc)})
                    rows.append({"seed": seed, "init": init, "method": method, "iterations": -1,
                                 "wall_clock_s": math.nan, "final_residual": math.nan,
                                 "r_est_tail": math.nan})
                    continue
                errors = np.linalg.norm(sigmas[1:] - ref.Sigma, axis=(1, 2))
                tail = float(estimate_r_factor(errors)[-1]) if errors.size else 0.0
                iterations[method].append(trace.iterations)
                wall[method].append(elapsed)
                rows.append({"seed": seed, "init": init, "method": method,
                             "iterations": trace.iterations, "wall_clock_s": elapsed,
                             "final_residual": trace.final.residual_norm, "r_est_tail": tail})
                if m > 0:
                    for r in check_ratio_bound(trace.residual_norms, spec.pair_bound,
                                               TME_RATIO_START, TME_RATIO_SLACK):
                        bound_rows.append({"seed": seed, "method": method, "k": r.k, "lhs": r.lhs,
                                           "rhs": r.rhs, "satisfied": r.satisfied,
                                           "floor": r.floor})
    per_method = {}
    fp_its = np.array(iterations.get("fp", []))
    for method in cfg.methods:
        its = np.array(iterations[method])
        entry = {"runs": int(its.size), "median_iterations": float(np.median(its)) if its.size else None,
                 "median_wall_clock_s": float(np.median(wall[method])) if its.size else None}
        if method != "fp" and fp_its.size == its.size and its.size:
            entry["fraction_fewer_iterations_than_fp"] = float(np.mean(its < fp_its))
            entry["median_iteration_ratio_to_fp"] = float(np.median(its) / np.median(fp_its))
        per_method[method] = entry
    bound_violations = sum(not r["satisfied"] for r in bound_rows)
    report.tables["tme"] = (TME_FIELDS, rows)
    report.tables["bound"] = (BOUND_FIELDS, bound_rows)
    report.violations = bound_violations + len(failures)
    report.summary = {"experiment": cfg.experiment, "model": cfg.model, "c0": cfg.c0,
                      "methods": per_method, "spectra": spectra, "failures": failures,
                      "bound_violations": bound_violations, "violations": report.violations}
    return report


def run_tme_jacobian(cfg: ExperimentConfig) -> ExperimentReport:
    """Finite-difference Jacobian of the log iteration at the computed fixed point."""
    rows = []
    violations = 0
    for seed in cfg.seeds:
        prob = _tyler_problem(cfg, seed)
        ref = solve_reference(prob)
        J = jacobian_fd(lambda w: tme_log_step(w, prob), ref.w)
        defect = symmetry_defect(J)
        unit = float(np.max(np.abs(J @ np.ones(prob.n) - 1.0)))
        spec = deflated_tme_spectrum(J)
        violations += int(defect > 1e-5) + int(unit > 1e-6) + int(spec.op_norm >= 1.0)
        rows.append({"seed": seed, "symmetry_defect": defect, "unit_row_error": unit,
                     **dataclasses.asdict(spec)})
    fields = ["seed", "symmetry_defect", "unit_row_error", "lambda_min", "lambda_max", "op_norm",
              "w0", "rate_bound"]
    report = ExperimentReport()
    report.tables["jacobian"] = (fields, rows)
    report.violations = violations
    report.summary = {"experiment": cfg.experiment, "model": cfg.model,
                      "mean_symmetry_defect": float(np.mean([r["symmetry_defect"] for r in rows])),
                      "max_unit_row_error": float(max(r["unit_row_error"] for r in rows)),
                      "violations": violations}
    return report


def run_tme_compare(cfg: ExperimentConfig) -> ExperimentReport:
    """Shape iteration against trace-normalised images of the log iteration, step by step."""
    rows = []
    worst = 0.0
    for seed in cfg.seeds:
        prob = _tyler_problem(cfg, seed)
        w = SeededStream(_init_seed(seed, 0)).normal(prob.n)
        S = sigma_from_w(w, prob, normalize=True)
        for k in range(1, cfg.steps + 1):
            w = tme_log_step(w, prob)
            S = tme_standard_step(S, prob)
            gap = float(np.linalg.norm(sigma_from_w(w, prob, normalize=True) - S))
            worst = max(worst, gap)
            rows.append({"seed": seed, "k": k, "frobenius_gap": gap})
    report = ExperimentReport()
    report.tables["compare"] = (["seed", "k", "frobenius_gap"], rows)
    report.violations = int(worst > 1e-8)
    report.summary = {"experiment": cfg.experiment, "max_frobenius_gap": worst,
                      "violations": report.violations}
    return report


def spectrum_grid(points: int, limit: float) -> np.ndarray:
    # exact negation symmetry so the antidiagonal is hit bit-for-bit
    g = limit * np.linspace(-1.0, 1.0, points)
    return 0.5 * (g - g[::-1])


def run_w0_table(cfg: ExperimentConfig) -> ExperimentReport:
    grid = spectrum_grid(cfg.grid_points, cfg.grid_limit)
    rows = []
    violations = 0
    for i, lo in enumerate(grid):
        for hi in grid[i:]:
            w0 = compute_w0(lo, hi)
            op_norm = max(abs(lo), abs(hi))
            equal = lo == -hi
            violations += int(w0 > op_norm + 1e-12)
            if equal:
                violations += int(abs(w0 - op_norm) > 1e-9)
            rows.append({"lambda_min": lo, "lambda_max": hi, "w0": w0, "op_norm": op_norm,
                         "rate_bound": math.sqrt(w0 * op_norm), "equality_flag": equal})
    report = ExperimentReport()
    report.tables["w0"] = (W0_FIELDS, rows)
    report.violations = violations
    report.summary = {"experiment": cfg.experiment, "rows": len(rows), "violations": violations}
    return report


RUNNERS = {
    "linear-bound": run_linear_bound,
    "linear-rate": run_linear_rate,
    "scalar-tight": run_scalar_tight,
    "tme-run": run_tme,
    "tme-jacobian": run_tme_jacobian,
    "tme-compare": run_tme_compare,
    "w0-table": run_w0_table,
}


def run_experiment(cfg: ExperimentConfig) -> ExperimentReport:
    report = RUNNERS[cfg.experiment](cfg)
    if cfg.out:
        report.write(cfg.out)
    return report


# experiment-specific defaults applied before the JSON config and flags
DEFAULTS = {
    "linear-bound": {"diagonal": list(W1_DIAGONAL), "seeds": list(range(100))},
    "linear-rate": {"methods": ["fp", "aa1", "aa2", "aa3"], "seeds": list(range(100))},
    "tme-run": {"methods": ["fp", "aa1", "aa2", "aa3"], "c0": 1e4},
    "tme-jacobian": {"seeds": list(range(5))},
    "tme-compare": {"seeds": list(range(1))},
}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="andersonfp", description=__doc__.split("\n\n")[0])
    ap.add_argument("--experiment", choices=EXPERIMENTS)
    ap.add_argument("--config", help="JSON file with ExperimentConfig fields")
    ap.add_argument("--seed-count", type=int, help="use seeds 0..N-1")
    ap.add_argument("--out", help="output directory for CSV tables and summary.json")
    ap.add_argument("--method", help="comma-separated list of fp, aa1, aa2, ...")
    ap.add_argument("--m", type=int, help="shorthand for --method aa<m>")
    ap.add_argument("--c0", type=float, help="coefficient bound (modified AA)")
    ap.add_argument("--beta", type=float, help="damping factor in [0, 1]")
    ap.add_argument("--tol", type=float)
    ap.add_argument("--max-iter", type=int, dest="max_iterations")
    ap.add_argument("--p", type=int)
    ap.add_argument("--n", type=int, help="operator size, or sample count for model1")
    ap.add_argument("--model", choices=("model1", "model2"))
    ap.add_argument("-v", "--verbose", action="store_true")
    return ap


def config_from_args(args: argparse.Namespace) -> ExperimentConfig:
    values: dict = {}
    if args.config:
        with open(args.config) as fh:
            values.update(json.load(fh))
    experiment = args.experiment or values.get("experiment")
    if experiment is None:
        raise ValueError("no experiment given (use --experiment or the config file)")
    merged = {**DEFAULTS.get(experiment, {}), **values, "experiment": experiment}
    if args.seed_count is not None:
        merged["seeds"] = list(range(args.seed_count))
    if args.method:
        merged["methods"] = [m.strip() for m in args.method.split(",") if m.strip()]
    if args.m is not None:
        merged["methods"] = [f"aa{args.m}"]
    for key in ("out", "c0", "beta", "tol", "max_iterations", "p", "model"):
        if getattr(args, key) is not None:
            merged[key] = getattr(args, key)
    if args.n is not None:
        merged["n_samples" if experiment.startswith("tme") else "n"] = args.n
        if experiment.startswith("linear"):
            merged["diagonal"] = None
    known = {f.name for f in dataclasses.fields(ExperimentConfig)}
    unknown = set(merged) - known
    if unknown:
        raise ValueError(f"unknown config keys: {sorted(unknown)}")
    return ExperimentConfig(**merged)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        cfg = config_from_args(args)
    except (ValueError, TypeError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    report = run_experiment(cfg)
    json.dump(_jsonable(report.summary), sys.stdout, indent=2, sort_keys=True)
    sys.stdout.write("\n")
    if report.violations:
        log.warning("%d invariant violations", report.violations)
    return 0 if report.violations == 0 else 1


if __name__ == "__main__":
    sys.exit(main())
