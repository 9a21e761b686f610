"""Convergence tables for the Gaussian-modulated plane-wave source.

Problem: ``beta = 1``, ``kappa = 10`` on ``[-1, 1]^d``,
``g = exp(-10 |x|^2 + 10 i x1)``, schedule ``dtT = 10 dt0``, ``T = kappa L``
with ``L = 2``. Row k uses ``dt0 = 5 * 10^-(k+1)`` with the step and grid
counts below. The step counts march past ``T`` (the schedule keeps its
``(a, b)`` but runs ``N_tau`` steps), which is what sets each row's final
pseudo-time and therefore its truncation error.
"""

from __future__ import annotations

import csv
import sys
from dataclasses import asdict, dataclass

import numpy as np

from .grid import ComplexField, Grid, RefractionField
from .helmholtz import apply_inverse_sqrt, relative_error, relative_residual, ub_estimate
from .oracle import exact_v1_v2, expand_function, find_eigenvalues
from .paraxial import StoppingRule
from .quadrature import QuadratureWeights, composite_weights
from .schedule import TimeStepSchedule, build_schedule

__all__ = ["ROWS", "ConvergenceRow", "run_row", "run_converge", "write_table", "fit_order", "row_feasible"]

KAPPA = 10.0
A0 = 10.0
L = 2.0
# (dt0, N_tau, N_x)
ROWS = [
    (5e-2, 102, 70),
    (5e-3, 1308, 200),
    (5e-4, 17810, 600),
    (5e-5, 233199, 1800),
    (5e-6, 2617277, 5400),
]
MEMORY_LIMIT = 4 * 2**30
ORACLE_MODES = 160


@dataclass
class ConvergenceRow:
    dt0: float
    n_tau: int
    n_x: int
    rel_err_v1: float
    ub: float
    rel_err_v2: float
    res: float
    t_final: float


def source_factors(dim: int):
    return [lambda x: np.exp(-A0 * x**2 + 1j * KAPPA * x)] + [lambda x: np.exp(-A0 * x**2)] * (dim - 1)


def source_field(grid: Grid) -> ComplexField:
    return ComplexField.from_function(
        grid, lambda *x: np.exp(-A0 * sum(xi**2 for xi in x) + 1j * KAPPA * x[0])
    )


def row_feasible(dim: int, row: int, limit: int = MEMORY_LIMIT) -> bool:
    """About eight complex fields live at once during a two-pass solve."""
    n_x = ROWS[row - 1][2]
    return 8 * 16 * n_x**dim <= limit


def row_schedule(row: int) -> TimeStepSchedule:
    dt0, n_tau, _ = ROWS[row - 1]
    return build_schedule(dt0, 10 * dt0, KAPPA * L, n_steps=n_tau)


_EXPANSIONS: dict = {}


def oracle_expansion(dim: int, modes: int = ORACLE_MODES):
    key = (dim, modes)
    if key not in _EXPANSIONS:
        basis = find_eigenvalues(KAPPA, L, modes, x_left=-1.0)
        _EXPANSIONS[key] = expand_function([basis] * dim, source_factors(dim))
    return _EXPANSIONS[key]


def run_row(dim: int, row: int, sched: TimeStepSchedule | None = None, weights: QuadratureWeights | None = None) -> ConvergenceRow:
    dt0, n_tau, n_x = ROWS[row - 1]
    grid = Grid.cube(dim, -1.0, 1.0, n_x)
    sched = sched or row_schedule(row)
    weights = weights or composite_weights(sched)
    g = source_field(grid)
    beta = RefractionField.uniform(grid, 1.0)
    exact1, exact2 = exact_v1_v2(oracle_expansion(dim), KAPPA, grid)
    v1, rep1 = apply_inverse_sqrt(g, beta, KAPPA, sched, weights, StoppingRule.fixed())
    ub = ub_estimate(rep1.final_max_norm, rep1.t_reached, KAPPA, L)
    v2, _ = apply_inverse_sqrt(v1, beta, KAPPA, sched, weights, StoppingRule.fixed())
    return ConvergenceRow(
        dt0=dt0,
        n_tau=sched.N,
        n_x=n_x,
        rel_err_v1=relative_error(v1, exact1),
        ub=ub,
        rel_err_v2=relative_error(v2, exact2),
        res=relative_residual(v2, g, beta, KAPPA),
        t_final=sched.t_final,
    )


def run_converge(dim: int, rows, out=None, log=sys.stderr) -> list[ConvergenceRow]:
    """Run the requested table rows (1-based); infeasible rows are skipped with a notice."""
    if dim not in (1, 2, 3):
        raise ValueError("dim must be 1, 2 or 3")
    results = []
    for r in rows:
        if not 1 <= r <= len(ROWS):
            raise ValueError(f"row {r} outside 1..{len(ROWS)}")
        if not row_feasible(dim, r):
            print(f"skipping row {r}: {ROWS[r - 1][2]}^{dim} grid exceeds the memory limit", file=log)
            continue
        results.append(run_row(dim, r))
    if out is not None:
        write_table(results, out)
    return results


COLUMNS = ["dt0", "n_tau", "n_x", "rel_err_v1", "ub", "rel_err_v2", "res"]


def write_table(rows: list[ConvergenceRow], out) -> None:
    own = isinstance(out, str)
    fh = open(out, "w", newline="") if own else out
    try:
        w = csv.writer(fh)
        w.writerow(COLUMNS)
        for row in rows:
            d = asdict(row)
            w.writerow([f"{d[c]:.6g}" if isinstance(d[c], float) else d[c] for c in COLUMNS])
    finally:
        if own:
            fh.close()


def fit_order(h, err) -> float:
    """Least-squares slope of ``log err`` against ``log h``."""
    x = np.log(np.asarray(h, dtype=float))
    y = np.log(np.asarray(err, dtype=float))
    return float(np.polyfit(x, y, 1)[0])


def parse_rows(text: str) -> list[int]:
    """``"1..3"``, ``"2"`` or ``"1,3"`` to a list of row numbers."""
    out: list[int] = []
    for part in text.split(","):
        part = part.strip()
        if ".." in part:
            lo, hi = part.split("..")
            out.extend(range(int(lo), int(hi) + 1))
        elif part:
            out.append(int(part))
    if not out:
        raise ValueError("no rows given")
    return out
