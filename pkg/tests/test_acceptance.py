"""Acceptance criteria, one test each; every test prints a single PASS/FAIL line."""

import math
import time

import numpy as np
import pytest

from andersonfp.aacore import AAConfig, aa_solve, reformulated_aa_linear
from andersonfp.datagen import SeededStream
from andersonfp.expcli import (ExperimentConfig, run_linear_bound, run_linear_rate, run_tme,
                               run_tme_compare, run_tme_jacobian, spectrum_grid)
from andersonfp.operators import W1_DIAGONAL, make_diag_operator, make_random_symmetric
from andersonfp.theory import compute_w0, estimate_r_factor, make_tight_init_scalar

from conftest import ACCEPTANCE_LINES


def verdict(number: int, passed: bool, detail: str) -> None:
    line = f"{'PASS' if passed else 'FAIL'} criterion {number}: {detail}"
    print(line)
    ACCEPTANCE_LINES.append(line)
    assert passed, line


def test_criterion_01_pairwise_bound():
    start = time.perf_counter()
    rep = run_linear_bound(ExperimentConfig("linear-bound", diagonal=list(W1_DIAGONAL),
                                            methods=["aa1", "aa2", "aa3"],
                                            seeds=list(range(100)), tol=1e-12))
    elapsed = time.perf_counter() - start
    rows = rep.tables["bound"][1]
    bad = sum(1 for r in rows if not r["satisfied"])
    worst = max(rep.summary["methods"][m]["max_ratio"] for m in ("aa1", "aa2", "aa3"))
    verdict(1, bad == 0 and elapsed < 10.0 and len(rows) > 0,
            f"W1 AA(1..3) x 100 seeds: {len(rows)} rows, {bad} violations, "
            f"max lhs/rhs {worst:.5f}, {elapsed:.1f}s (< 10s)")


def test_criterion_02_rate_bound():
    start = time.perf_counter()
    rep = run_linear_rate(ExperimentConfig("linear-rate", methods=["fp", "aa1", "aa2", "aa3"],
                                           seeds=list(range(100)), n=100, eig_low=-0.9,
                                           eig_high=0.9, forced_min_eig=-0.95))
    elapsed = time.perf_counter() - start
    s, bound = rep.summary["methods"], rep.summary["rate_bound"]
    assert rep.summary["op_norm"] == pytest.approx(0.95, abs=1e-12)
    fp_ok = 0.93 <= s["fp"]["min_tail"] and s["fp"]["max_tail"] <= 0.955
    aa_max = max(s[m]["max_tail"] for m in ("aa1", "aa2", "aa3"))
    order_ok = s["aa3"]["median_tail"] <= s["aa1"]["median_tail"]
    verdict(2, fp_ok and aa_max <= bound + 0.02 and order_ok and elapsed < 120.0,
            f"FP tail in [{s['fp']['min_tail']:.4f}, {s['fp']['max_tail']:.4f}] (need [0.93, 0.955]); "
            f"max AA tail {aa_max:.4f} <= {bound:.4f}+0.02; median AA(3) "
            f"{s['aa3']['median_tail']:.4f} <= AA(1) {s['aa1']['median_tail']:.4f}; {elapsed:.1f}s")


def test_criterion_03_scalar_tightness():
    w = 0.5
    x0, x1 = make_tight_init_scalar(w)
    op = make_diag_operator([w, w])
    cfg = AAConfig(m=1, residual_tol=1e-300, max_iterations=24)
    # residual = (w - 1) x for W = w I
    r = aa_solve(op, x0 / (w - 1), cfg, x1=x1 / (w - 1)).residual_norms
    ratios = r[3:23] / r[1:21]
    ref = reformulated_aa_linear(w * np.eye(2), x0, x1, 1, 23)
    ref_ratios = ref[3:23] / ref[1:21]
    dev = max(np.abs(ratios - 1 / 6).max(), np.abs(ref_ratios - 1 / 6).max())
    verdict(3, ratios.size == 20 and dev <= 1e-8,
            f"20 pairs, max |ratio - 1/6| = {dev:.2e} (<= 1e-8)")


def test_criterion_04_non_acceleration():
    w = 0.8
    op = make_diag_operator([w, -w])
    # (1 - w) u^2 = (1 + w) v^2 in residual coordinates
    xt0 = np.array([math.sqrt(1 + w), math.sqrt(1 - w)])
    x0 = np.linalg.solve(op.W - np.eye(2), xt0)
    r = aa_solve(op, x0, AAConfig(m=1, residual_tol=1e-300, max_iterations=20)).residual_norms
    dev = np.abs(r[1:21] / r[0:20] - w).max()
    tr2 = aa_solve(op, x0, AAConfig(m=2, residual_tol=1e-12))
    errors = np.linalg.norm(tr2.iterates[1:], axis=1)  # x* = 0
    tail = float(estimate_r_factor(errors)[-1])
    verdict(4, r.size >= 21 and dev <= 1e-10 and tail <= w - 1e-3,
            f"AA(1) max |step ratio - 0.8| = {dev:.2e} over 20 steps; "
            f"AA(2) tail r_est {tail:.3e} <= 0.799")


def test_criterion_05_reformulation_equivalence():
    worst = 0.0
    for i in range(20):
        op = make_random_symmetric(10, -0.95, 0.95, seed=i)
        x0 = SeededStream(500 + i).normal(10)
        xt0 = op.W @ x0 - x0
        for m in (1, 2, 3):
            r = aa_solve(op, x0, AAConfig(m=m, residual_tol=1e-300, max_iterations=50)).residual_norms
            norms = reformulated_aa_linear(op.W, xt0, op.W @ xt0, m, 50)
            assert r.size == norms.size == 51
            worst = max(worst, float(np.abs(r - norms).max()))
    verdict(5, worst <= 1e-10, f"20 operators x m=1..3, 50 steps: max gap {worst:.2e} (<= 1e-10)")


def test_criterion_06_w0_properties():
    grid = spectrum_grid(50, 0.95)
    above, anti_dev = 0.0, 0.0
    for i, lo in enumerate(grid):
        for hi in grid[i:]:
            w0, norm = compute_w0(lo, hi), max(abs(lo), abs(hi))
            above = max(above, w0 - norm)
            if lo == -hi:
                anti_dev = max(anti_dev, abs(w0 - norm))
    scalar_dev = max(abs(compute_w0(w, w) - w / (2 - w)) for w in np.arange(1, 10) / 10)
    verdict(6, above <= 1e-12 and anti_dev <= 1e-9 and scalar_dev <= 1e-9,
            f"max(w0 - ||W||) = {above:.2e}, antidiagonal dev {anti_dev:.2e}, "
            f"scalar dev {scalar_dev:.2e}")


def test_criterion_07_jacobian_symmetry():
    start = time.perf_counter()
    rep = run_tme_jacobian(ExperimentConfig("tme-jacobian", seeds=list(range(5)), model="model1",
                                            p=20, n_samples=40))
    elapsed = time.perf_counter() - start
    rows = rep.tables["jacobian"][1]
    mean_defect = float(np.mean([r["symmetry_defect"] for r in rows]))
    max_defect = max(r["symmetry_defect"] for r in rows)
    unit = max(r["unit_row_error"] for r in rows)
    verdict(7, max_defect <= 1e-5 and unit <= 1e-6 and elapsed < 30.0,
            f"5 seeds: mean defect {mean_defect:.2e}, max {max_defect:.2e} (<= 1e-5); "
            f"max |J1 - 1| {unit:.2e} (<= 1e-6); {elapsed:.1f}s")


TME_SEEDS = list(range(10))


@pytest.fixture(scope="module")
def modified_runs():
    return {model: run_tme(ExperimentConfig("tme-run", model=model, methods=["aa1", "aa2", "aa3"],
                                            seeds=TME_SEEDS, inits=10, c0=1e4))
            for model in ("model1", "model2")}


@pytest.fixture(scope="module")
def speed_runs():
    return {model: run_tme(ExperimentConfig("tme-run", model=model,
                                            methods=["fp", "aa1", "aa2", "aa3"],
                                            seeds=TME_SEEDS, inits=10))
            for model in ("model1", "model2")}


def test_criterion_08_modified_aa_bound(modified_runs):
    parts, ok = [], True
    for model, rep in modified_runs.items():
        rows = [r for r in rep.tables["bound"][1] if not r["floor"]]
        bad = sum(1 for r in rows if not r["satisfied"])
        worst = max(r["lhs"] / r["rhs"] for r in rows)
        ok &= bad == 0 and not rep.summary["failures"] and len(rows) > 0
        parts.append(f"{model}: {len(rows)} rows, {bad} above 1.05x bound, max lhs/rhs {worst:.3f}")
    verdict(8, ok, "; ".join(parts))


def test_criterion_09_tme_speed(speed_runs):
    parts, ok = [], True
    for model, rep in speed_runs.items():
        rows = rep.tables["tme"][1]
        ok &= not rep.summary["failures"]
        ok &= all(r["final_residual"] <= 1e-12 for r in rows)
        fp = {(r["seed"], r["init"]): r["iterations"] for r in rows if r["method"] == "fp"}
        fp_median = float(np.median(list(fp.values())))
        for method in ("aa1", "aa2", "aa3"):
            its = {(r["seed"], r["init"]): r["iterations"] for r in rows if r["method"] == method}
            frac = float(np.mean([its[key] < fp[key] for key in fp]))
            ratio = float(np.median(list(its.values()))) / fp_median
            if method in ("aa2", "aa3"):
                ok &= frac >= 0.95
            if model == "model2":
                ok &= ratio <= 0.5
            parts.append(f"{model} {method}: fewer than FP in {frac:.0%}, median ratio {ratio:.2f}")
    verdict(9, ok, "; ".join(parts))


def test_criterion_10_damping():
    rep = run_linear_bound(ExperimentConfig("linear-bound", diagonal=list(W1_DIAGONAL),
                                            methods=["aa1", "aa2", "aa3"], seeds=list(range(50)),
                                            beta=0.7))
    rows = rep.tables["bound"][1]
    bad = sum(1 for r in rows if not r["satisfied"])
    verdict(10, bad == 0 and len(rows) > 0,
            f"beta=0.7, W replaced by 0.7 W + 0.3 I: {len(rows)} rows, {bad} violations, "
            f"bound {rep.summary['pair_bound']:.4f}")


def test_criterion_11_tme_equivalence():
    rep = run_tme_compare(ExperimentConfig("tme-compare", seeds=[0], model="model1", p=20,
                                           n_samples=40, steps=100))
    gap = rep.summary["max_frobenius_gap"]
    verdict(11, len(rep.tables["compare"][1]) == 100 and gap <= 1e-8,
            f"100 steps, max Frobenius gap {gap:.2e} (<= 1e-8)")
