"""Benchmark sweeps (SOR vs PGMRES), omega sweeps, and a Picard harness.

All sweeps run every cell on the *identical* scaled system so the two
solvers are compared under the same absolute tolerance.  Timings are
wall-clock medians over ``repeat`` runs and exclude file I/O and matrix
construction; preconditioner setup time is reported as its own column since
it dominates the cost difference at loose tolerances.
"""

from __future__ import annotations

import time
import warnings
from dataclasses import dataclass, field
from statistics import median

import numpy as np

from .scaling import ScalingMode, apply_left, equilibrate
from .solvers import SolverConfig, SolveReport, sor, solve_system
from .sparse import CsrMatrix, check_vector, spmv
from .testgen import ProblemSpec, generate

#: Relative nonlinear-residual reduction at which the Picard loop stops.
PICARD_OUTER_TOL = 1e-6


@dataclass
class BenchRow:
    """One (solver, tolerance) cell of a benchmark table."""

    solver: str
    tau: float
    iterations: int
    wall_time_s: float
    converged: bool
    factor_time_s: float = 0.0


@dataclass
class OmegaRow:
    """One relaxation-parameter cell of an SOR omega sweep."""

    omega: float
    tau: float
    iterations: int
    wall_time_s: float
    converged: bool
    best: bool = False


@dataclass
class PicardState:
    """Snapshot of the outer nonlinear iteration after step ``iteration``."""

    head: np.ndarray
    iteration: int
    nonlinear_residual: float
    epsilon: float
    tau: float
    linear_iterations: int = 0


@dataclass
class PicardResult:
    states: list[PicardState] = field(default_factory=list)
    converged: bool = False


def _run_cell(solver: str, a, b, tau: float, cfg: SolverConfig,
              scale_mode: ScalingMode, droptol: float, lfil: int) -> SolveReport:
    if solver == "pgmres":
        run_cfg = SolverConfig(tau=tau, restart=cfg.restart,
                               max_total_iters=cfg.max_total_iters,
                               omega=cfg.omega,
                               reorthogonalize=cfg.reorthogonalize)
        return solve_system(a, b, run_cfg, scale_mode=scale_mode,
                            droptol=droptol, lfil=lfil)
    if solver == "sor":
        t0 = time.perf_counter()
        s = equilibrate(a, scale_mode)
        a_s, b_s = apply_left(s, a, b)
        setup = time.perf_counter() - t0
        run_cfg = SolverConfig(tau=tau, restart=cfg.restart,
                               max_total_iters=cfg.max_total_iters,
                               omega=cfg.omega)
        report = sor(a_s, b_s, cfg=run_cfg)
        report.factor_time = setup
        report.wall_time += setup
        return report
    raise ValueError(f"unknown solver {solver!r}")


def run_bench(a: CsrMatrix, b, taus, solvers=("pgmres", "sor"),
              cfg: SolverConfig | None = None,
              scale_mode: ScalingMode = ScalingMode.ABS_ROW_SUM,
              droptol: float = 0.01, lfil: int = 10,
              repeat: int = 3) -> list[BenchRow]:
    """Iteration/timing table over a tolerance sweep.

    Rows are emitted sorted by (solver, tau descending).  A failing cell is
    recorded with ``converged=False`` rather than aborting the sweep.
    """
    cfg = cfg or SolverConfig()
    b = check_vector(b, a.n, "b")
    rows: list[BenchRow] = []
    for solver in sorted(set(solvers)):
        for tau in sorted(taus, reverse=True):
            times = []
            factor_times = []
            report = None
            failed = None
            for _ in range(max(repeat, 1)):
                try:
                    report = _run_cell(solver, a, b, tau, cfg, scale_mode,
                                       droptol, lfil)
                except Exception as exc:
                    failed = exc
                    break
                times.append(report.wall_time)
                factor_times.append(report.factor_time)
            if failed is not None or report is None:
                warnings.warn(f"bench cell ({solver}, tau={tau:g}) failed: {failed}")
                rows.append(BenchRow(solver=solver, tau=tau, iterations=0,
                                     wall_time_s=0.0, converged=False))
                continue
            rows.append(BenchRow(
                solver=solver, tau=tau, iterations=report.iterations,
                wall_time_s=median(times), converged=report.converged,
                factor_time_s=median(factor_times)))
    return rows


def omega_sweep(a: CsrMatrix, b, omegas, tau: float,
                cfg: SolverConfig | None = None,
                scale_mode: ScalingMode = ScalingMode.ABS_ROW_SUM,
                repeat: int = 1) -> list[OmegaRow]:
    """SOR iteration counts across relaxation parameters; flags the argmin."""
    cfg = cfg or SolverConfig()
    b = check_vector(b, a.n, "b")
    rows: list[OmegaRow] = []
    for omega in sorted(omegas):
        if not 0.0 < omega < 2.0:
            raise ValueError(f"omega {omega} outside (0, 2)")
        run_cfg = SolverConfig(tau=tau, omega=omega,
                               max_total_iters=cfg.max_total_iters)
        times = []
        report = None
        for _ in range(max(repeat, 1)):
            report = _run_cell("sor", a, b, tau, run_cfg, scale_mode, 0.0, 0)
            times.append(report.wall_time)
        rows.append(OmegaRow(omega=omega, tau=tau, iterations=report.iterations,
                             wall_time_s=median(times),
                             converged=report.converged))
    converged_rows = [r for r in rows if r.converged]
    if converged_rows:
        best = min(converged_rows, key=lambda r: (r.iterations, r.omega))
        best.best = True
    return rows


def picard_run(spec: ProblemSpec, nu: float, epsilon: float,
               max_outer: int = 30, cfg: SolverConfig | None = None,
               scale_mode: ScalingMode = ScalingMode.ABS_ROW_SUM,
               droptol: float = 0.01, lfil: int = 10) -> PicardResult:
    """Picard iteration on an invented smooth nonlinearity, to exercise the
    dynamic linear tolerance.

    The nonlinear system is ``A h + nu * sinh(h) - c = 0`` with ``c``
    manufactured so the generated ``x_true`` is the exact solution.  This
    diagonal nonlinearity is a test device only, chosen so each outer step
    solves ``A x = -F(h_k)`` for the update; it models no physics.  With a
    fixed normalized tolerance ``epsilon`` the per-step linear tolerance
    ``tau_k = epsilon * ||b_k||_*`` shrinks as the outer residual does, which
    is exactly the dynamic-tolerance behaviour the harness demonstrates.
    """
    if epsilon <= 0.0:
        raise ValueError("epsilon must be positive")
    cfg = cfg or SolverConfig()
    a, _, x_true = generate(spec)
    c = spmv(a, x_true) + nu * np.sinh(x_true)
    h = np.zeros(a.n)
    result = PicardResult()

    def residual(vec):
        return spmv(a, vec) + nu * np.sinh(vec) - c

    f0_norm = float(np.linalg.norm(residual(h)))
    if f0_norm == 0.0:
        result.converged = True
        return result
    for k in range(1, max_outer + 1):
        f_k = residual(h)
        f_norm = float(np.linalg.norm(f_k))
        if f_norm / f0_norm <= PICARD_OUTER_TOL:
            result.converged = True
            return result
        if not np.isfinite(f_norm) or f_norm > 1e3 * f0_norm:
            return result
        b_k = -f_k
        step_cfg = SolverConfig(epsilon=epsilon, restart=cfg.restart,
                                max_total_iters=cfg.max_total_iters,
                                omega=cfg.omega)
        report = solve_system(a, b_k, step_cfg, scale_mode=scale_mode,
                              droptol=droptol, lfil=lfil)
        h = h + report.solution
        result.states.append(PicardState(
            head=h.copy(), iteration=k,
            nonlinear_residual=float(np.linalg.norm(residual(h))),
            epsilon=epsilon, tau=report.tau,
            linear_iterations=report.iterations))
        if not report.converged:
            return result
    result.converged = (result.states[-1].nonlinear_residual / f0_norm
                        <= PICARD_OUTER_TOL) if result.states else False
    return result
