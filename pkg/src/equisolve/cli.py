"""Command-line front end.

Subcommands: solve, profile, study, bench, omega-sweep, picard, generate.
All tabular output is CSV on stdout (or ``--out``), prefixed with the
versioned tag line ``# equisolve-csv v1``.  Exit codes: 0 when every
requested run converged, 1 on numerical failure, 2 on usage errors.

Option precedence is CLI flags > ``--config`` key=value file > defaults.
"""

from __future__ import annotations

import argparse
import sys

import numpy as np

from . import errcontrol
from .bench import omega_sweep, picard_run, run_bench
from .matrix_market import (read_matrix_market, read_vector,
                            write_matrix_market, write_vector)
from .scaling import ScalingMode
from .solvers import SolverConfig, solve_system, sor
from .sparse import profile, spmv
from .testgen import ProblemSpec, generate, spec_suite, suite_by_name

CSV_TAG = "# equisolve-csv v1"

_SCALE_CHOICES = [m.value for m in ScalingMode]


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return f"{value:.10g}"
    return str(value)


def _emit(header: list[str], rows: list[list], out: str | None) -> None:
    lines = [CSV_TAG, ",".join(header)]
    lines += [",".join(_fmt(v) for v in row) for row in rows]
    text = "\n".join(lines) + "\n"
    if out:
        with open(out, "w", encoding="ascii") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _load_config(argv: list[str]) -> dict[str, str]:
    """Pre-scan for --config and load key=value defaults from the file."""
    path = None
    for i, arg in enumerate(argv):
        if arg == "--config" and i + 1 < len(argv):
            path = argv[i + 1]
        elif arg.startswith("--config="):
            path = arg.split("=", 1)[1]
    if path is None:
        return {}
    values: dict[str, str] = {}
    try:
        with open(path, "r", encoding="ascii") as fh:
            for line in fh:
                line = line.strip()
                if not line or line.startswith("#"):
                    continue
                if "=" not in line:
                    raise ValueError(f"malformed config line: {line!r}")
                key, val = line.split("=", 1)
                values[key.strip().replace("-", "_")] = val.strip()
    except OSError as exc:
        raise SystemExit(f"cannot read config file: {exc}") from exc
    return values


def _parse_taus(text: str) -> list[float]:
    """Either a comma list (``1e-2,1e-4``) or a decade range (``1e-1..1e-8``)."""
    text = text.strip()
    if ".." in text:
        lo_s, hi_s = text.split("..", 1)
        start, stop = float(lo_s), float(hi_s)
        k0, k1 = int(round(np.log10(start))), int(round(np.log10(stop)))
        step = -1 if k1 < k0 else 1
        return [10.0 ** k for k in range(k0, k1 + step, step)]
    return [float(t) for t in text.split(",") if t]


def _load_system(args) -> tuple:
    """Resolve (matrix, rhs, x_true-or-None) from --matrix/--rhs or --suite."""
    if getattr(args, "suite", None):
        a, b, x_true = generate(suite_by_name(args.suite))
        return a, b, x_true
    if not getattr(args, "matrix", None):
        raise SystemExit("either --matrix or --suite is required")
    a, companion = read_matrix_market(args.matrix)
    if getattr(args, "rhs", None):
        b = read_vector(args.rhs)
        if b.size != a.n:
            raise SystemExit(f"rhs length {b.size} does not match order {a.n}")
    elif companion is not None:
        b = companion
    else:
        b = np.ones(a.n)
    return a, b, None


def _solver_config(args) -> SolverConfig:
    return SolverConfig(
        tau=args.tol,
        epsilon=getattr(args, "eps", None),
        restart=args.restart,
        max_total_iters=args.max_iters,
        omega=args.omega,
    )


def _add_common(parser: argparse.ArgumentParser, with_solver: bool = True):
    parser.add_argument("--matrix", help="Matrix Market coordinate file")
    parser.add_argument("--rhs", help="Matrix Market array file with b")
    parser.add_argument("--suite", help="named generated system (WELL, SKEW, ILL6, ILL9)")
    parser.add_argument("--out", help="write CSV here instead of stdout")
    parser.add_argument("--config", help="key=value file with option defaults")
    parser.add_argument("--seed", type=int, default=0)
    if with_solver:
        parser.add_argument("--tol", type=float, default=1e-8,
                            help="absolute residual tolerance tau")
        parser.add_argument("--eps", type=float, default=None,
                            help="normalized tolerance; overrides --tol via "
                                 "tau = eps * ||b||_*")
        parser.add_argument("--scale", default=ScalingMode.ABS_ROW_SUM.value,
                            choices=_SCALE_CHOICES)
        parser.add_argument("--droptol", type=float, default=0.01)
        parser.add_argument("--lfil", type=int, default=10)
        parser.add_argument("--restart", type=int, default=20)
        parser.add_argument("--omega", type=float, default=1.1)
        parser.add_argument("--max-iters", type=int, default=100_000,
                            dest="max_iters")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="equisolve",
        description="Sparse iterative solver benchmark and error-control tool")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="solve one system and report a CSV row")
    _add_common(p)
    p.add_argument("--solver", default="pgmres", choices=["pgmres", "sor"])

    p = sub.add_parser("profile", help="report matrix properties")
    _add_common(p, with_solver=False)
    p.add_argument("--cond", action="store_true",
                   help="also estimate the condition number")

    p = sub.add_parser("study", help="forward-error study over a tau sweep")
    _add_common(p)
    p.add_argument("--taus", default="1e-1..1e-8")
    p.add_argument("--modes", default="scaled,unscaled")

    p = sub.add_parser("bench", help="SOR vs PGMRES iteration/timing table")
    _add_common(p)
    p.add_argument("--taus", default="1e-1..1e-8")
    p.add_argument("--solvers", default="pgmres,sor")
    p.add_argument("--repeat", type=int, default=3)

    p = sub.add_parser("omega-sweep", help="SOR relaxation-parameter sweep")
    _add_common(p)
    p.add_argument("--omegas", default="1.0,1.1,1.2,1.3,1.4,1.5,1.6,1.7,1.8,1.9")

    p = sub.add_parser("picard", help="dynamic-tolerance Picard demonstration")
    _add_common(p)
    p.add_argument("--nu", type=float, default=0.01,
                   help="strength of the invented diagonal nonlinearity")
    p.add_argument("--max-outer", type=int, default=30, dest="max_outer")

    p = sub.add_parser("generate", help="write a generated system to files")
    _add_common(p, with_solver=False)
    p.add_argument("--nx", type=int, default=10)
    p.add_argument("--ny", type=int, default=10)
    p.add_argument("--layers", type=int, default=1)
    p.add_argument("--streams", type=int, default=0)
    p.add_argument("--stream-scale", type=float, default=1.0, dest="stream_scale")
    p.add_argument("--asymmetry", type=float, default=0.0)
    p.add_argument("--out-prefix", required=True, dest="out_prefix")
    return parser


def _cmd_solve(args) -> int:
    a, b, _ = _load_system(args)
    cfg = _solver_config(args)
    mode = ScalingMode(args.scale)
    if args.solver == "sor":
        from .scaling import apply_left, equilibrate

        s = equilibrate(a, mode)
        a_s, b_s = apply_left(s, a, b)
        if args.eps is not None:
            cfg = SolverConfig(tau=args.eps * float(np.linalg.norm(b_s)),
                               restart=args.restart, max_total_iters=args.max_iters,
                               omega=args.omega)
        report = sor(a_s, b_s, cfg=cfg)
    else:
        report = solve_system(a, b, cfg, scale_mode=mode,
                              droptol=args.droptol, lfil=args.lfil)
    _emit(["solver", "n", "nnz", "scale", "tau", "epsilon", "iterations",
           "restarts", "termination", "converged", "final_gamma",
           "factor_time_s", "wall_time_s"],
          [[args.solver, a.n, a.nnz, mode.value, report.tau, report.epsilon,
            report.iterations, report.restarts, report.termination.value,
            report.converged, report.final_gamma, report.factor_time,
            report.wall_time]], args.out)
    return 0 if report.converged else 1


def _cmd_profile(args) -> int:
    a, _, _ = _load_system(args)
    prof = profile(a, with_cond=args.cond)
    _emit(["dimension", "nnz", "sparsity_pct", "normality", "cond_estimate"],
          [[prof.dimension, prof.nnz, prof.sparsity_pct, prof.normality,
            prof.cond_estimate]], args.out)
    return 0


def _cmd_study(args) -> int:
    a, b, _ = _load_system(args)
    mode_names = [m.strip() for m in args.modes.split(",") if m.strip()]
    modes = tuple(m == "scaled" for m in mode_names)
    taus = _parse_taus(args.taus)
    rows = errcontrol.error_study(
        a, b, taus=taus, modes=modes, scale_mode=ScalingMode(args.scale),
        droptol=args.droptol, lfil=args.lfil, restart=args.restart,
        max_total_iters=args.max_iters)
    _emit(["tau", "exact_rel_err", "ferr", "epsilon", "scaled"],
          [[r.tau, r.exact_rel_err, r.ferr, r.epsilon, r.scaled] for r in rows],
          args.out)
    expected = len(taus) * len(set(modes))
    return 0 if len(rows) == expected else 1


def _cmd_bench(args) -> int:
    a, b, _ = _load_system(args)
    cfg = _solver_config(args)
    rows = run_bench(a, b, taus=_parse_taus(args.taus),
                     solvers=[s.strip() for s in args.solvers.split(",") if s.strip()],
                     cfg=cfg, scale_mode=ScalingMode(args.scale),
                     droptol=args.droptol, lfil=args.lfil, repeat=args.repeat)
    _emit(["solver", "tau", "iterations", "converged", "factor_time_s",
           "wall_time_s"],
          [[r.solver, r.tau, r.iterations, r.converged, r.factor_time_s,
            r.wall_time_s] for r in rows], args.out)
    return 0 if all(r.converged for r in rows) else 1


def _cmd_omega_sweep(args) -> int:
    a, b, _ = _load_system(args)
    cfg = _solver_config(args)
    omegas = [float(w) for w in args.omegas.split(",") if w]
    rows = omega_sweep(a, b, omegas, tau=args.tol, cfg=cfg,
                       scale_mode=ScalingMode(args.scale))
    _emit(["omega", "tau", "iterations", "converged", "wall_time_s", "best"],
          [[r.omega, r.tau, r.iterations, r.converged, r.wall_time_s, r.best]
           for r in rows], args.out)
    return 0 if all(r.converged for r in rows) else 1


def _cmd_picard(args) -> int:
    if args.suite:
        spec = suite_by_name(args.suite)
    else:
        raise SystemExit("picard requires --suite (the harness generates "
                         "its own nonlinear problem)")
    eps = args.eps if args.eps is not None else 1e-5
    result = picard_run(spec, nu=args.nu, epsilon=eps,
                        max_outer=args.max_outer, cfg=_solver_config(args),
                        scale_mode=ScalingMode(args.scale),
                        droptol=args.droptol, lfil=args.lfil)
    _emit(["k", "nonlinear_residual", "tau_k", "epsilon", "linear_iterations"],
          [[s.iteration, s.nonlinear_residual, s.tau, s.epsilon,
            s.linear_iterations] for s in result.states], args.out)
    return 0 if result.converged else 1


def _cmd_generate(args) -> int:
    if args.suite:
        spec = suite_by_name(args.suite)
    else:
        spec = ProblemSpec(grid_nx=args.nx, grid_ny=args.ny, layers=args.layers,
                           stream_nodes=args.streams,
                           stream_scale=args.stream_scale,
                           asymmetry=args.asymmetry, seed=args.seed)
    a, b, x_true = generate(spec)
    matrix_path = args.out_prefix + ".mtx"
    rhs_path = args.out_prefix + "_rhs.mtx"
    x_path = args.out_prefix + "_x.mtx"
    write_matrix_market(a, matrix_path)
    write_vector(b, rhs_path)
    write_vector(x_true, x_path)
    _emit(["n", "nnz", "matrix", "rhs", "x_true"],
          [[a.n, a.nnz, matrix_path, rhs_path, x_path]], args.out)
    return 0


_COMMANDS = {
    "solve": _cmd_solve,
    "profile": _cmd_profile,
    "study": _cmd_study,
    "bench": _cmd_bench,
    "omega-sweep": _cmd_omega_sweep,
    "picard": _cmd_picard,
    "generate": _cmd_generate,
}


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    config = _load_config(argv)
    if config:
        subparsers = [sp for sub_action in parser._subparsers._group_actions
                      for sp in sub_action.choices.values()]
        known = {action.dest for action in parser._actions}
        for sp in subparsers:
            known |= {action.dest for action in sp._actions}
        unknown = set(config) - known
        if unknown:
            parser.error(f"unknown config keys: {', '.join(sorted(unknown))}")
        for sp in subparsers:
            dests = {action.dest for action in sp._actions}
            sp.set_defaults(**{k: v for k, v in config.items() if k in dests})
    args = parser.parse_args(argv)
    # argparse stores config values as strings; coerce the numeric ones back.
    for key in ("tol", "eps", "droptol", "omega", "stream_scale", "asymmetry", "nu"):
        if hasattr(args, key) and isinstance(getattr(args, key), str):
            setattr(args, key, float(getattr(args, key)))
    for key in ("lfil", "restart", "max_iters", "seed", "nx", "ny", "layers",
                "streams", "repeat", "max_outer"):
        if hasattr(args, key) and isinstance(getattr(args, key), str):
            setattr(args, key, int(getattr(args, key)))
    try:
        return _COMMANDS[args.command](args)
    except SystemExit:
        raise
    except (ValueError, KeyError, OSError, RuntimeError) as exc:
        print(f"equisolve: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
