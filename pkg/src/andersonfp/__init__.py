"""Anderson acceleration AA(m) for fixed-point problems, its convergence-factor
bound for symmetric linear operators, and Tyler's M-estimation experiments."""

from .aacore import (AAConfig, AAHistory, Diverged, FixedPointOperator, Infeasible, SolveTrace,
                     aa_solve, aa_solve_subproblem, aa_step, fp_iterate, reformulated_aa_linear)
from .operators import LinearSymmetricOperator, make_diag_operator, make_random_symmetric
from .theory import (SpectrumSummary, check_pairwise_bound, compute_w0, estimate_r_factor,
                     make_tight_init_scalar, scalar_w0, spectrum_of, w0_objective)

__version__ = "0.1.0"
