"""Command-line entry point ``oftsolve``.

Exit codes: 0 success, 2 configuration error, 3 solver failure, 4 I/O error.
"""

from __future__ import annotations

import argparse
import csv
import sys
from pathlib import Path

from . import __version__
from .config import ConfigError, SolverConfig, load_config
from .io import OftfError, PgmParseError, write_csv, write_oftf
from .oracle import ContourError, ResonanceError, SeedFailureError, char_function, find_eigenvalues
from .paraxial import SingularLineError, set_threads

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_SOLVER = 3
EXIT_IO = 4


def _write_field(cfg: SolverConfig, field, base: Path) -> Path:
    out = Path(cfg.output_path)
    if not out.is_absolute():
        out = base / out
    if cfg.output_format == "oftf":
        write_oftf(out, field)
    else:
        write_csv(out, field)
    return out


def cmd_solve(args, inverse_sqrt_only: bool = False) -> int:
    from .helmholtz import apply_inverse_sqrt, build_source, solve_helmholtz, ub_estimate

    cfg = load_config(args.config)
    base = Path(args.config).resolve().parent
    beta = cfg.refraction_field(base)
    g = build_source(beta, cfg.incident_field())
    sched = cfg.schedule()
    weights = cfg.weights(sched)
    if inverse_sqrt_only:
        v, rep = apply_inverse_sqrt(g, beta, cfg.kappa, sched, weights, cfg.stopping_rule())
        lines = [
            f"steps = {rep.steps}",
            f"t_reached = {rep.t_reached:.6g}",
            f"truncated = {rep.truncated}",
            f"ub_estimate = {ub_estimate(rep.final_max_norm, rep.t_reached, cfg.kappa, max(cfg.grid.lengths)):.6g}",
            f"wall_time = {rep.wall_time:.3f}",
        ]
        text = "\n".join(lines)
    else:
        v, rep = solve_helmholtz(g, beta, cfg.kappa, sched, weights, cfg.stopping_rule())
        text = rep.as_text()
    out = _write_field(cfg, v, base)
    print(text)
    print(f"output = {out}")
    return EXIT_OK


def cmd_converge(args) -> int:
    from .converge import parse_rows, run_converge, write_table

    try:
        rows = parse_rows(args.rows)
    except ValueError as exc:
        raise ConfigError("rows", str(exc)) from None
    results = run_converge(args.dim, rows)
    write_table(results, sys.stdout)
    if args.out:
        write_table(results, args.out)
    return EXIT_OK


def cmd_eigen(args) -> int:
    if not (args.alpha > 0 and args.length > 0 and args.count >= 1):
        raise ConfigError("eigen", "alpha, length and count must be positive")
    basis = find_eigenvalues(args.alpha, args.length, args.count)
    fh = open(args.out, "w", newline="") if args.out else sys.stdout
    try:
        w = csv.writer(fh)
        w.writerow(["n", "re_lambda", "im_lambda", "abs_f"])
        resid = abs(char_function(basis.lambdas, basis.alpha, basis.L))
        for n, (lam, r) in enumerate(zip(basis.lambdas, resid), start=1):
            w.writerow([n, f"{lam.real:.17g}", f"{lam.imag:.17g}", f"{r:.3e}"])
    finally:
        if args.out:
            fh.close()
    return EXIT_OK


def cmd_demo(args) -> int:
    from .demos import luneburg_config, run_luneburg, run_ode1, run_ode2

    if args.which == "ode1":
        r = run_ode1(J=args.points or 50)
        print(f"ode1: dx={r.dx:.4g} dt={r.dt:.4g} steps={r.steps} max_error={r.max_error:.3e}")
    elif args.which == "ode2":
        r = run_ode2(dx=args.dx or 0.05, cfl=args.cfl)
        print(f"ode2: dx={r.dx:.4g} dt={r.dt:.4g} steps={r.steps} max_error={r.max_error:.3e}")
    else:
        n = tuple(args.n) if args.n else (120, 120, 150)
        cfg = luneburg_config(kappa=args.kappa, n=n, output_path=args.out or "luneburg.oftf")
        res = run_luneburg(cfg)
        write_oftf(cfg.output_path, res.total)
        x, y, z = res.peak_location
        print(f"luneburg: peak |v_total| = {res.peak_value:.4g} at ({x:.3f}, {y:.3f}, {z:.3f})")
        print(f"distance to focus (0,0,1) = {res.distance_to_focus:.3f} (wavelength {res.wavelength:.3f})")
        print(res.report.as_text())
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="oftsolve", description="Helmholtz solver via the inverse square-root operator")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("--threads", type=int, default=None, help="worker cap (default: OFT_THREADS or all cores)")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("solve", help="two-pass Helmholtz solve for the scattered field")
    s.add_argument("config")
    s = sub.add_parser("apply-sqrt", help="single inverse square-root application to the source")
    s.add_argument("config")

    s = sub.add_parser("converge", help="convergence table for the Gaussian plane-wave source")
    s.add_argument("--dim", type=int, choices=(1, 2, 3), default=1)
    s.add_argument("--rows", default="1..3", help="row range such as 1..3 or 1,2")
    s.add_argument("--out", help="also write the table to this CSV file")

    s = sub.add_parser("eigen", help="eigenvalues of the 1-D non-reflecting problem as CSV")
    s.add_argument("--alpha", type=float, default=10.0)
    s.add_argument("--length", type=float, default=2.0)
    s.add_argument("--count", type=int, default=20)
    s.add_argument("--out")

    s = sub.add_parser("demo", help="worked examples")
    s.add_argument("which", choices=("ode1", "ode2", "luneburg"))
    s.add_argument("--points", type=int, help="ode1: intervals on [0, 1]")
    s.add_argument("--dx", type=float, help="ode2: grid spacing")
    s.add_argument("--cfl", type=float, default=1.0, help="ode2: dt/dx")
    s.add_argument("--kappa", type=float, default=10.0, help="luneburg: wavenumber")
    s.add_argument("--n", type=int, nargs=3, help="luneburg: grid points per axis")
    s.add_argument("--out", help="luneburg: OFTF output for the total field")
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    set_threads(args.threads)
    handlers = {
        "solve": cmd_solve,
        "apply-sqrt": lambda a: cmd_solve(a, inverse_sqrt_only=True),
        "converge": cmd_converge,
        "eigen": cmd_eigen,
        "demo": cmd_demo,
    }
    try:
        return handlers[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (OSError, OftfError, PgmParseError) as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (SingularLineError, FloatingPointError, ResonanceError, SeedFailureError, ContourError, ArithmeticError) as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except ValueError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
