"""equisolve: sparse iterative linear solvers with row equilibration,
ILUT preconditioning, and forward-error control.

The package provides CSR sparse-matrix plumbing, diagonal row equilibration
with the scaled norm it induces, a threshold/fill-limited incomplete LU
preconditioner, restarted preconditioned GMRES and SOR with full convergence
histories, condition-number based forward-error bounds, a deterministic
generator of badly scaled groundwater-like test systems, and a benchmark CLI
(``equisolve``).
"""

from .sparse import (CsrMatrix, MatrixProfile, DENSE_CAP, DenseCapExceeded,
                     spmv, spmv_transpose, to_dense, from_dense, from_coo,
                     eye, csr_transpose, frobenius_norm, normality, profile)
from .matrix_market import (MatrixMarketError, read_matrix_market, read_vector,
                            write_matrix_market, write_vector)
from .scaling import (ScalingMode, ScalingOp, ScalingError, equilibrate,
                      apply_left, scaled_norm)
from .ilut import (IlutFactors, FactorizationError, ilut_factorize,
                   apply_precond, apply_precond_transpose)
from .solvers import (LinearOperator, SolverConfig, SolveReport, Termination,
                      BreakdownError, hessenberg_lsq, pgmres, sor,
                      prepare_system, solve_system)
from .errcontrol import (CondEstimate, CondMethod, NormKind, ErrorStudyRow,
                         DEFAULT_TAUS, cond_exact, cond_estimate_1norm,
                         ferr_bound, nearby_system, error_study)
from .testgen import ProblemSpec, generate, spec_suite, suite_by_name
from .bench import (BenchRow, OmegaRow, PicardState, PicardResult, run_bench,
                    omega_sweep, picard_run)

__version__ = "0.1.0"

__all__ = [
    "CsrMatrix", "MatrixProfile", "DENSE_CAP", "DenseCapExceeded",
    "spmv", "spmv_transpose", "to_dense", "from_dense", "from_coo", "eye",
    "csr_transpose", "frobenius_norm", "normality", "profile",
    "MatrixMarketError", "read_matrix_market", "read_vector",
    "write_matrix_market", "write_vector",
    "ScalingMode", "ScalingOp", "ScalingError", "equilibrate", "apply_left",
    "scaled_norm",
    "IlutFactors", "FactorizationError", "ilut_factorize", "apply_precond",
    "apply_precond_transpose",
    "LinearOperator", "SolverConfig", "SolveReport", "Termination",
    "BreakdownError", "hessenberg_lsq", "pgmres", "sor", "prepare_system",
    "solve_system",
    "CondEstimate", "CondMethod", "NormKind", "ErrorStudyRow", "DEFAULT_TAUS",
    "cond_exact", "cond_estimate_1norm", "ferr_bound", "nearby_system",
    "error_study",
    "ProblemSpec", "generate", "spec_suite", "suite_by_name",
    "BenchRow", "OmegaRow", "PicardState", "PicardResult", "run_bench",
    "omega_sweep", "picard_run",
]
