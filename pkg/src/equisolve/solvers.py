"""Iterative solvers: restarted left-preconditioned GMRES and SOR.

Both solvers are matrix-free at the core: PGMRES consumes a
:class:`LinearOperator` whose callbacks supply ``A @ x`` and the
preconditioner application ``M^-1 v`` (the Python analogue of a
reverse-communication interface), so it is independent of storage format and
preconditioner choice.  Each solve returns a :class:`SolveReport` with the
full convergence history.

The residual estimate ``gamma`` is maintained by Givens rotations applied to
the Arnoldi Hessenberg matrix; it equals the minimized least-squares residual
``||beta e_1 - H y||_2`` at every inner step, so convergence can be tested
cheaply inside a restart cycle instead of only at cycle boundaries.
"""

from __future__ import annotations

import time
import warnings
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable

import numpy as np

from .ilut import apply_precond, ilut_factorize
from .scaling import ScalingMode, equilibrate, apply_left, scaled_norm
from .sparse import CsrMatrix, check_vector, spmv

#: An Arnoldi vector shorter than this multiple of beta ends the cycle early.
HAPPY_BREAKDOWN_REL = 1e-14
#: Relative gamma decrease over two full cycles below this flags stagnation.
STAGNATION_REL = 1e-16
#: SOR residual growth beyond this factor over its running minimum stops the sweep.
SOR_DIVERGENCE_FACTOR = 1e6


class Termination(str, Enum):
    CONVERGED = "converged"
    MAX_ITERS = "max-iters"
    BREAKDOWN = "breakdown"


class BreakdownError(RuntimeError):
    """Exactly singular triangular factor in the Hessenberg least squares."""


@dataclass
class LinearOperator:
    """Callback contract for the system operator and optional preconditioner.

    ``matvec(x)`` must return ``A @ x``; ``psolve(v)`` must return
    ``M^-1 v`` and defaults to the identity.  Callbacks must be re-entrant
    and deterministic within a run.
    """

    n: int
    matvec: Callable[[np.ndarray], np.ndarray]
    psolve: Callable[[np.ndarray], np.ndarray] | None = None

    def apply_preconditioned(self, x: np.ndarray) -> np.ndarray:
        y = self.matvec(x)
        return y if self.psolve is None else self.psolve(y)

    def precondition(self, v: np.ndarray) -> np.ndarray:
        return v if self.psolve is None else self.psolve(v)


@dataclass
class SolverConfig:
    """Tolerances and knobs shared by the solvers.

    ``tau`` is the absolute tolerance on the (preconditioned) residual
    estimate.  When ``epsilon`` is set, :func:`solve_system` derives
    ``tau = epsilon * ||b||_*`` from the scaled right-hand-side norm.
    """

    tau: float = 1e-8
    epsilon: float | None = None
    restart: int = 20
    max_total_iters: int = 100_000
    omega: float = 1.1
    reorthogonalize: bool = False

    def __post_init__(self):
        if self.tau <= 0.0:
            raise ValueError("tau must be positive")
        if self.epsilon is not None and self.epsilon <= 0.0:
            raise ValueError("epsilon must be positive")
        if self.restart < 1:
            raise ValueError("restart length must be at least 1")
        if not 0.0 < self.omega < 2.0:
            raise ValueError("omega must lie in (0, 2)")
        if self.max_total_iters < 1:
            raise ValueError("max_total_iters must be at least 1")


@dataclass
class SolveReport:
    """Outcome and convergence history of one solve."""

    solution: np.ndarray
    iterations: int
    restarts: int
    gamma_history: np.ndarray
    wall_time: float
    termination: Termination
    beta0: float
    final_gamma: float
    cycle_starts: list[int] = field(default_factory=list)
    tau: float = 0.0
    epsilon: float | None = None
    scaled_rhs_norm: float | None = None
    factor_time: float = 0.0
    diverged: bool = False

    @property
    def converged(self) -> bool:
        return self.termination == Termination.CONVERGED


def _givens(a: float, b: float) -> tuple[float, float]:
    r = float(np.hypot(a, b))
    if r == 0.0:
        return 1.0, 0.0
    return a / r, b / r


def hessenberg_lsq(hess, beta: float) -> tuple[np.ndarray, float]:
    """Solve ``min_y ||beta e_1 - H y||_2`` for upper-Hessenberg H.

    Uses progressive Givens rotations; the returned ``gamma`` is the achieved
    minimum, equal to the magnitude of the last rotated right-hand-side entry.

    Parameters
    ----------
    hess : (j+1, j) array_like, upper Hessenberg.
    beta : scale of the right-hand side ``beta e_1``.

    Raises
    ------
    BreakdownError
        If the rotated triangular factor is exactly singular.
    """
    h = np.array(hess, dtype=np.float64)
    if h.ndim != 2 or h.shape[0] != h.shape[1] + 1:
        raise ValueError(f"expected (j+1, j) Hessenberg shape, got {h.shape}")
    j = h.shape[1]
    if j > 1 and np.any(np.tril(h[2:, : j - 1], k=-1) != 0.0):
        raise ValueError("matrix has nonzeros below the first subdiagonal")
    g = np.zeros(j + 1)
    g[0] = beta
    rotations: list[tuple[float, float]] = []
    for col in range(j):
        for k, (c, s) in enumerate(rotations):
            hk, hk1 = h[k, col], h[k + 1, col]
            h[k, col] = c * hk + s * hk1
            h[k + 1, col] = -s * hk + c * hk1
        c, s = _givens(h[col, col], h[col + 1, col])
        rotations.append((c, s))
        h[col, col] = c * h[col, col] + s * h[col + 1, col]
        h[col + 1, col] = 0.0
        g[col], g[col + 1] = c * g[col], -s * g[col]
    gamma = abs(float(g[j]))
    y = np.zeros(j)
    for row in range(j - 1, -1, -1):
        acc = g[row] - h[row, row + 1:j] @ y[row + 1:]
        if h[row, row] == 0.0:
            raise BreakdownError(f"singular triangular factor at column {row}")
        y[row] = acc / h[row, row]
    return y, gamma


def pgmres(op: LinearOperator, b, x0=None, cfg: SolverConfig | None = None,
           debug: bool = False) -> SolveReport:
    """Restarted left-preconditioned GMRES.

    Per cycle: build a Krylov basis of the preconditioned operator with
    modified Gram-Schmidt, track the residual estimate ``gamma`` through
    Givens rotations, and exit the cycle as soon as ``gamma <= tau`` (or on a
    happy breakdown ``h_{j+1,j} < 1e-14 * beta``); then update
    ``x = x0 + V y`` and restart from the new iterate.

    Never raises on numerical trouble: stagnation over two full restart
    cycles or an exhausted iteration budget terminate with the best iterate
    seen and a ``Breakdown`` / ``MaxIters`` label.
    """
    cfg = cfg or SolverConfig()
    b = check_vector(b, op.n, "b")
    x = np.zeros(op.n) if x0 is None else check_vector(x0, op.n, "x0").copy()
    m = cfg.restart
    t0 = time.perf_counter()

    gamma_history: list[float] = []
    cycle_starts: list[int] = []
    cycle_end_gammas: list[float] = []
    total_inner = 0
    beta0 = None
    best_gamma = np.inf
    best_x = x.copy()
    termination = Termination.MAX_ITERS
    gamma = np.inf

    while True:
        r0 = op.precondition(b - op.matvec(x))
        beta = float(np.linalg.norm(r0))
        if beta0 is None:
            beta0 = beta
        cycle_starts.append(len(gamma_history))
        gamma_history.append(beta)
        gamma = beta
        if beta < best_gamma:
            best_gamma, best_x = beta, x.copy()
        if beta <= cfg.tau:
            termination = Termination.CONVERGED
            break
        if total_inner >= cfg.max_total_iters:
            termination = Termination.MAX_ITERS
            break

        V = np.empty((m + 1, op.n))
        V[0] = r0 / beta
        H = np.zeros((m + 1, m))
        cos = np.zeros(m)
        sin = np.zeros(m)
        g = np.zeros(m + 1)
        g[0] = beta
        ncols = 0
        happy = False

        for j in range(m):
            w = op.precondition(op.matvec(V[j]))
            for i in range(j + 1):
                hij = float(V[i] @ w)
                w -= hij * V[i]
                H[i, j] = hij
            if cfg.reorthogonalize:
                for i in range(j + 1):
                    corr = float(V[i] @ w)
                    w -= corr * V[i]
                    H[i, j] += corr
            hnext = float(np.linalg.norm(w))
            H[j + 1, j] = hnext
            total_inner += 1
            ncols = j + 1

            for k in range(j):
                hk, hk1 = H[k, j], H[k + 1, j]
                H[k, j] = cos[k] * hk + sin[k] * hk1
                H[k + 1, j] = -sin[k] * hk + cos[k] * hk1
            c, s = _givens(H[j, j], H[j + 1, j])
            cos[j], sin[j] = c, s
            H[j, j] = c * H[j, j] + s * H[j + 1, j]
            H[j + 1, j] = 0.0
            g[j], g[j + 1] = c * g[j], -s * g[j]
            gamma = abs(float(g[j + 1]))
            gamma_history.append(gamma)

            happy = hnext < HAPPY_BREAKDOWN_REL * beta
            if not happy:
                V[j + 1] = w / hnext
            if gamma <= cfg.tau or happy or total_inner >= cfg.max_total_iters:
                break

        try:
            y = _back_substitute(H, g, ncols)
        except BreakdownError:
            termination = Termination.BREAKDOWN
            break
        x = x + V[:ncols].T @ y

        if debug:
            nv = ncols if happy else ncols + 1
            gram = V[:nv] @ V[:nv].T
            assert np.max(np.abs(gram - np.eye(nv))) <= 1e-10, \
                "Krylov basis lost orthonormality"

        if gamma < best_gamma:
            best_gamma, best_x = gamma, x.copy()
        if gamma <= cfg.tau:
            termination = Termination.CONVERGED
            break
        if total_inner >= cfg.max_total_iters:
            termination = Termination.MAX_ITERS
            break
        cycle_end_gammas.append(gamma)
        if len(cycle_end_gammas) >= 3:
            ref = cycle_end_gammas[-3]
            if ref > 0.0 and (ref - gamma) / ref < STAGNATION_REL:
                termination = Termination.BREAKDOWN
                break

    solution = x if termination == Termination.CONVERGED else best_x
    final_gamma = gamma if termination == Termination.CONVERGED else best_gamma
    return SolveReport(
        solution=solution,
        iterations=total_inner,
        restarts=max(len(cycle_starts) - 1, 0),
        gamma_history=np.asarray(gamma_history),
        wall_time=time.perf_counter() - t0,
        termination=termination,
        beta0=beta0,
        final_gamma=float(final_gamma),
        cycle_starts=cycle_starts,
        tau=cfg.tau,
        epsilon=cfg.epsilon,
    )


def _back_substitute(H: np.ndarray, g: np.ndarray, ncols: int) -> np.ndarray:
    y = np.zeros(ncols)
    for row in range(ncols - 1, -1, -1):
        if H[row, row] == 0.0:
            raise BreakdownError(f"singular triangular factor at column {row}")
        y[row] = (g[row] - H[row, row + 1:ncols] @ y[row + 1:ncols]) / H[row, row]
    return y


def sor(a: CsrMatrix, b, x0=None, cfg: SolverConfig | None = None) -> SolveReport:
    """Successive over-relaxation with forward sweeps.

    One sweep updates every unknown in place,
    ``x_i <- (1 - omega) x_i + (omega / a_ii)(b_i - sum_{j != i} a_ij x_j)``,
    and counts as one iteration.  The true residual ``||b - A x||_2`` is
    recomputed by a full product after every sweep so SOR and PGMRES can be
    compared under the same absolute tolerance.
    """
    cfg = cfg or SolverConfig()
    b = check_vector(b, a.n, "b")
    x = np.zeros(a.n) if x0 is None else check_vector(x0, a.n, "x0").copy()
    omega = cfg.omega
    t0 = time.perf_counter()

    diag = np.zeros(a.n)
    off_cols: list[np.ndarray] = []
    off_vals: list[np.ndarray] = []
    for i in range(a.n):
        cols, vals = a.row(i)
        pos = np.searchsorted(cols, i)
        if pos >= cols.size or cols[pos] != i or vals[pos] == 0.0:
            raise ValueError(f"zero diagonal entry at row {i}")
        diag[i] = vals[pos]
        keep = cols != i
        off_cols.append(cols[keep])
        off_vals.append(vals[keep])

    res = float(np.linalg.norm(b - spmv(a, x)))
    history = [res]
    beta0 = res
    min_res = res
    sweeps = 0
    termination = Termination.MAX_ITERS
    diverged = False
    best_x = x.copy()

    if res <= cfg.tau:
        termination = Termination.CONVERGED
    else:
        while sweeps < cfg.max_total_iters:
            for i in range(a.n):
                oc, ov = off_cols[i], off_vals[i]
                acc = b[i] - (ov @ x[oc] if oc.size else 0.0)
                x[i] = (1.0 - omega) * x[i] + omega * acc / diag[i]
            sweeps += 1
            res = float(np.linalg.norm(b - spmv(a, x)))
            history.append(res)
            if res < min_res:
                min_res = res
                best_x = x.copy()
            if res <= cfg.tau:
                termination = Termination.CONVERGED
                break
            if res > SOR_DIVERGENCE_FACTOR * min_res:
                diverged = True
                termination = Termination.MAX_ITERS
                break

    solution = x if termination == Termination.CONVERGED else best_x
    final = res if termination == Termination.CONVERGED else min_res
    return SolveReport(
        solution=solution,
        iterations=sweeps,
        restarts=0,
        gamma_history=np.asarray(history),
        wall_time=time.perf_counter() - t0,
        termination=termination,
        beta0=beta0,
        final_gamma=float(final),
        cycle_starts=[0],
        tau=cfg.tau,
        epsilon=cfg.epsilon,
        diverged=diverged,
    )


def prepare_system(a: CsrMatrix, b, scale_mode: ScalingMode = ScalingMode.ABS_ROW_SUM,
                   droptol: float = 0.01, lfil: int = 10, pivot_shift: bool = False):
    """Equilibrate, scale, and factorize; returns the solve-ready pieces.

    Returns ``(scaling, scaled_matrix, scaled_rhs, factors, setup_time)``.
    Scaling or factorization failures propagate with their stage attached
    (``exc.stage`` is ``"scaling"`` or ``"factorization"``).
    """
    t0 = time.perf_counter()
    s = equilibrate(a, scale_mode)
    a_s, b_s = apply_left(s, a, b)
    factors = ilut_factorize(a_s, droptol=droptol, lfil=lfil, pivot_shift=pivot_shift)
    return s, a_s, b_s, factors, time.perf_counter() - t0


def solve_system(a: CsrMatrix, b, cfg: SolverConfig | None = None,
                 scale_mode: ScalingMode = ScalingMode.ABS_ROW_SUM,
                 droptol: float = 0.01, lfil: int = 10,
                 pivot_shift: bool = False, x0=None) -> SolveReport:
    """Full pipeline: equilibrate -> scale -> ILUT -> preconditioned GMRES.

    When ``cfg.epsilon`` is set the stopping tolerance becomes the dynamic
    ``tau = epsilon * ||b||_*`` (the scaled rhs norm ``||D^-1 b||_2``), and
    the solve additionally guarantees the forward contract: the recomputed
    scaled relative residual ``||D^-1 (b - A x)|| / ||D^-1 b||`` is at most
    ``epsilon`` on convergence (the solver re-enters with a tighter internal
    tolerance in the rare case the estimate-based stop leaves it above).
    """
    cfg = cfg or SolverConfig()
    t0 = time.perf_counter()
    s, a_s, b_s, factors, setup_time = prepare_system(
        a, b, scale_mode, droptol, lfil, pivot_shift)

    scaled_rhs = scaled_norm(s, b)
    if cfg.epsilon is not None:
        if scaled_rhs == 0.0:
            raise ValueError("cannot derive tau from epsilon: zero right-hand side")
        tau = cfg.epsilon * scaled_rhs
    else:
        tau = cfg.tau

    op = LinearOperator(a.n, matvec=lambda v: spmv(a_s, v),
                        psolve=lambda v: apply_precond(factors, v))
    run_cfg = SolverConfig(tau=tau, restart=cfg.restart,
                           max_total_iters=cfg.max_total_iters,
                           omega=cfg.omega, reorthogonalize=cfg.reorthogonalize)
    report = pgmres(op, b_s, x0=x0, cfg=run_cfg)

    if cfg.epsilon is not None and report.converged:
        b_s_norm = float(np.linalg.norm(b_s))
        iters = report.iterations
        inner_tau = tau
        for _ in range(5):
            rel = float(np.linalg.norm(b_s - spmv(a_s, report.solution))) / b_s_norm
            if rel <= cfg.epsilon:
                break
            inner_tau *= 0.25
            retry_cfg = SolverConfig(tau=inner_tau, restart=cfg.restart,
                                     max_total_iters=cfg.max_total_iters,
                                     omega=cfg.omega,
                                     reorthogonalize=cfg.reorthogonalize)
            report = pgmres(op, b_s, x0=report.solution, cfg=retry_cfg)
            iters += report.iterations
            if not report.converged:
                warnings.warn("tolerance tightening for the epsilon contract "
                              "did not converge; reporting the best iterate")
                break
        report.iterations = iters

    report.tau = tau
    report.epsilon = cfg.epsilon
    report.scaled_rhs_norm = scaled_rhs
    report.factor_time = setup_time
    report.wall_time = time.perf_counter() - t0
    return report
