"""Block coordinate projected gradient descent with adaptive stepsizes.

The solver handles composite objectives F = f + psi + phi (block-Lipschitz
f, twice-differentiable psi, separable convex indicator phi) by cyclic
per-block gradient steps with a stepsize derived from the positive root of
a scalar polynomial, followed by exact projection. Companion modules cover
an orthogonal nonnegative matrix factorization application, convergence
rate tooling, and a batch experiment harness.
"""

from .blocks import BlockPartition, extract_block, make_partition, scatter_block
from .onmf import (OnmfInstance, OnmfProblem, OnmfState, cpgd_onmf_cycle,
                   grad_V, grad_W, lipschitz_constants, onmf_objective,
                   orthogonality_error, synthetic_instance)
from .rates import (RateFit, RecurrenceSpec, check_rate_bounds, rate_constant,
                    fit_kl_exponent, simulate_recurrence, superlinear_contraction,
                    kl_rate_bound)
from .solver import (CompositeProblem, CycleRecord, RunLog, SeparableQuadratic,
                     SolverConfig, box_stationarity_residual, cpgd_block_update,
                     run_cpgd, run_pgd_baseline, stationarity_bound)
from .stepsize import (StepsizePolyParams, StepsizeResult, adaptive_stepsize,
                       cubic_root_closed_form, solve_stepsize_poly, stepsize_HF)

__version__ = "0.1.0"

__all__ = [
    "BlockPartition", "make_partition", "extract_block", "scatter_block",
    "StepsizePolyParams", "StepsizeResult", "solve_stepsize_poly",
    "stepsize_HF", "adaptive_stepsize", "cubic_root_closed_form",
    "CompositeProblem", "SolverConfig", "CycleRecord", "RunLog",
    "SeparableQuadratic", "cpgd_block_update", "run_cpgd", "run_pgd_baseline",
    "stationarity_bound", "box_stationarity_residual",
    "OnmfInstance", "OnmfState", "OnmfProblem", "onmf_objective", "grad_W",
    "grad_V", "lipschitz_constants", "orthogonality_error", "cpgd_onmf_cycle",
    "synthetic_instance",
    "RecurrenceSpec", "RateFit", "simulate_recurrence", "check_rate_bounds",
    "rate_constant", "kl_rate_bound", "superlinear_contraction", "fit_kl_exponent",
]
