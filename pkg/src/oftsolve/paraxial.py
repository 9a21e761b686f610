"""Pseudo-time paraxial evolution with BDF1-ADI and non-reflecting faces.

Solves ``u_t = i (beta - 1) u + (i/kappa^2) Laplacian u`` with
``u + (i/kappa) du/dn = 0`` on every face. One step of size ``dt`` applies

    (I + dt A1)^{-1}, then (I + dt A2)^{-1}, then (I + dt A3)^{-1}

with ``A1 = -i (beta - 1) - i kappa^-2 d_xx`` and ``Ad = -i kappa^-2 d_dd``
for the other axes, so the zeroth-order term lives entirely in the axis-1
factor. Each factor is a set of independent line solves.

Line systems
------------
Interior rows carry the centered stencil. The boundary unknowns are tied to
their neighbours by the three-point Robin rows

    p0 u_0 + p1 u_1 + p2 u_2 = 0,   p0 = kappa + 3i/(2h), p1 = -2i/h, p2 = i/(2h)

(mirrored at the far end). Substituting these rows into the first and last
interior rows leaves a tridiagonal system for the interior unknowns; the
boundary values are recovered afterwards. This is algebraically the same as
solving the full line system with the Robin rows in place.

Memory layout
-------------
Field arrays are kept in Fortran order so axis 1 is contiguous. A sweep along
axis ``d`` views the array as ``(A, m, B)`` with the solve axis in the middle;
lines are distributed over ``B`` and over blocks of ``A`` so every output
point is written by exactly one task, which makes results independent of the
thread count.
"""

from __future__ import annotations

import math
import os
import time
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable

import numba
import numpy as np
from numba import njit, prange

from .grid import ComplexField, Grid, GridMismatchError, RefractionField
from .quadrature import OftAccumulator, QuadratureWeights
from .schedule import TimeStepSchedule, step_sizes

__all__ = [
    "ParaxialProblem",
    "TridiagonalSystem",
    "SingularLineError",
    "thomas_solve",
    "adi_step",
    "evolve",
    "evolve_and_accumulate",
    "StoppingRule",
    "StopKind",
    "EvolveReport",
    "set_threads",
    "PIVOT_TOL",
]

PIVOT_TOL = 1e-300
_BLOCK = 64
_LINE_BLOCK = 16


class SingularLineError(ArithmeticError):
    """A zero pivot appeared in a line solve."""

    def __init__(self, axis: int, line: int, message: str | None = None):
        self.axis = axis
        self.line = line
        super().__init__(message or f"singular pivot on axis {axis}, line {line}")


def set_threads(n: int | None = None) -> int:
    """Cap the worker count; ``None`` reads ``OFT_THREADS`` or uses all cores."""
    limit = numba.config.NUMBA_NUM_THREADS
    if n is None:
        env = os.environ.get("OFT_THREADS")
        n = int(env) if env else limit
    n = max(1, min(int(n), limit))
    numba.set_num_threads(n)
    return n


# ---------------------------------------------------------------------------
# generic tridiagonal solve


@dataclass
class TridiagonalSystem:
    sub: np.ndarray
    diag: np.ndarray
    sup: np.ndarray
    rhs: np.ndarray

    def __post_init__(self):
        self.sub = np.asarray(self.sub, dtype=complex)
        self.diag = np.asarray(self.diag, dtype=complex)
        self.sup = np.asarray(self.sup, dtype=complex)
        self.rhs = np.asarray(self.rhs, dtype=complex)
        m = len(self.diag)
        if m < 2:
            raise ValueError("tridiagonal system needs at least 2 rows")
        if len(self.sub) != m - 1 or len(self.sup) != m - 1 or len(self.rhs) != m:
            raise ValueError("inconsistent tridiagonal band lengths")

    def matvec(self, x: np.ndarray) -> np.ndarray:
        y = self.diag * x
        y[1:] += self.sub * x[:-1]
        y[:-1] += self.sup * x[1:]
        return y


@njit(cache=True)
def _thomas(sub, diag, sup, rhs, out):
    m = diag.shape[0]
    cp = np.empty(m, dtype=np.complex128)
    piv = diag[0]
    if abs(piv) < PIVOT_TOL:
        return 0
    cp[0] = sup[0] / piv if m > 1 else 0.0
    out[0] = rhs[0] / piv
    for j in range(1, m):
        piv = diag[j] - sub[j - 1] * cp[j - 1]
        if abs(piv) < PIVOT_TOL:
            return j
        if j < m - 1:
            cp[j] = sup[j] / piv
        out[j] = (rhs[j] - sub[j - 1] * out[j - 1]) / piv
    for j in range(m - 2, -1, -1):
        out[j] -= cp[j] * out[j + 1]
    return -1


def thomas_solve(system: TridiagonalSystem, axis: int = -1, line: int = -1) -> np.ndarray:
    """Solve a complex tridiagonal system by forward elimination / back substitution.

    No pivoting; raises :class:`SingularLineError` if a pivot falls below
    ``PIVOT_TOL`` in magnitude.
    """
    out = np.empty(len(system.diag), dtype=complex)
    bad = _thomas(system.sub, system.diag, system.sup, system.rhs, out)
    if bad >= 0:
        raise SingularLineError(axis, line, f"zero pivot at row {bad} (axis {axis}, line {line})")
    return out


# ---------------------------------------------------------------------------
# batched line sweeps


@njit(cache=True)
def _solve3(m00, m01, m02, m10, m11, m12, m20, m21, m22, r0, r1, r2):
    det = m00 * (m11 * m22 - m12 * m21) - m01 * (m10 * m22 - m12 * m20) + m02 * (m10 * m21 - m11 * m20)
    x0 = (r0 * (m11 * m22 - m12 * m21) - m01 * (r1 * m22 - m12 * r2) + m02 * (r1 * m21 - m11 * r2)) / det
    x1 = (m00 * (r1 * m22 - m12 * r2) - r0 * (m10 * m22 - m12 * m20) + m02 * (m10 * r2 - r1 * m20)) / det
    x2 = (m00 * (m11 * r2 - r1 * m21) - m01 * (m10 * r2 - r1 * m20) + r0 * (m10 * m21 - m11 * m20)) / det
    return det, x0, x1, x2


@njit(cache=True)
def _line_factors(m, c, shift_line, scale, has_shift, e_sub, e_diag, inv, cp):
    """Reciprocal pivots and eliminated super-diagonal of one reduced line system.

    The diagonal shift of row j is ``scale * shift_line[j]``. Fills ``inv`` and
    ``cp``; returns the failing row or -1.
    """
    n_int = m - 2
    for jj in range(n_int):
        diag = 1.0 - 2.0 * c
        if has_shift:
            diag += scale * shift_line[jj + 1]
        sub = c
        sup = c
        if jj == 0:
            diag += e_diag
            sup = e_sub
        if jj == n_int - 1:
            diag += e_diag
            sub = e_sub
        piv = diag - sub * cp[jj - 1] if jj > 0 else diag
        if abs(piv) < PIVOT_TOL:
            return jj
        # conj/|.|^2 is much cheaper than a general complex division; pivots are O(1..1e8)
        r = 1.0 / (piv.real * piv.real + piv.imag * piv.imag)
        inv[jj] = complex(piv.real * r, -piv.imag * r)
        cp[jj] = sup * inv[jj]
    return -1


@njit(cache=True)
def _apply_line(u, a, b, m, c, e_sub, p0, p1, p2, inv, cp):
    n_int = m - 2
    u[a, 1, b] = u[a, 1, b] * inv[0]
    for jj in range(1, n_int):
        sub = e_sub if jj == n_int - 1 else c
        u[a, jj + 1, b] = (u[a, jj + 1, b] - sub * u[a, jj, b]) * inv[jj]
    for jj in range(n_int - 2, -1, -1):
        u[a, jj + 1, b] -= cp[jj] * u[a, jj + 2, b]
    u[a, 0, b] = -(p1 * u[a, 1, b] + p2 * u[a, 2, b]) / p0
    u[a, m - 1, b] = -(p1 * u[a, m - 2, b] + p2 * u[a, m - 3, b]) / p0


@njit(parallel=True, cache=True)
def _sweep(u, shift, scale, has_shift, c, p0, p1, p2, status):
    """Solve all lines of ``u`` (shape (A, m, B)) along the middle axis in place.

    Interior row j: ``c u_{j-1} + (1 - 2c + s_j) u_j + c u_{j+1} = rhs_j``
    with ``s_j = scale * shift_j`` when ``has_shift``. The boundary unknowns are
    eliminated through the Robin rows, leaving a tridiagonal interior system.
    ``status[task]`` receives the first failing line index or -1.
    """
    A = u.shape[0]
    m = u.shape[1]
    B = u.shape[2]
    nblk = (A + _BLOCK - 1) // _BLOCK
    ntask = nblk * B
    e_sub = c * (1.0 - p2 / p0)  # coupling to the far neighbour after elimination
    e_diag = -c * p1 / p0  # diagonal correction after elimination
    if m > 3 and not has_shift:
        # every line shares one factorization
        dummy = np.zeros(1)
        inv = np.empty(m - 2, dtype=np.complex128)
        cp = np.empty(m - 2, dtype=np.complex128)
        bad = _line_factors(m, c, dummy, scale, False, e_sub, e_diag, inv, cp)
        for task in prange(ntask):
            status[task] = -1 if bad < 0 else task
            if bad >= 0:
                continue
            b = task // nblk
            a0 = (task % nblk) * _BLOCK
            a1 = min(a0 + _BLOCK, A)
            # row-major over the block so the contiguous axis is innermost
            for a in range(a0, a1):
                u[a, 1, b] = u[a, 1, b] * inv[0]
            for jj in range(1, m - 2):
                sub = e_sub if jj == m - 3 else c
                for a in range(a0, a1):
                    u[a, jj + 1, b] = (u[a, jj + 1, b] - sub * u[a, jj, b]) * inv[jj]
            for jj in range(m - 4, -1, -1):
                for a in range(a0, a1):
                    u[a, jj + 1, b] -= cp[jj] * u[a, jj + 2, b]
            for a in range(a0, a1):
                u[a, 0, b] = -(p1 * u[a, 1, b] + p2 * u[a, 2, b]) / p0
                u[a, m - 1, b] = -(p1 * u[a, m - 2, b] + p2 * u[a, m - 3, b]) / p0
        return
    if m > 3 and A == 1:
        # per-line factors (axis-1 sweep with the beta shift); interleave a block of lines
        nlb = (B + _LINE_BLOCK - 1) // _LINE_BLOCK
        for task in prange(ntask):
            status[task] = -1
        for tb in prange(nlb):
            b0 = tb * _LINE_BLOCK
            b1 = min(b0 + _LINE_BLOCK, B)
            nb = b1 - b0
            n_int = m - 2
            inv = np.empty((n_int, nb), dtype=np.complex128)
            cp = np.empty((n_int, nb), dtype=np.complex128)
            failed = -1
            for jj in range(n_int):
                for k in range(nb):
                    diag = 1.0 - 2.0 * c
                    if has_shift:
                        diag += scale * shift[0, jj + 1, b0 + k]
                    sub = c
                    sup = c
                    if jj == 0:
                        diag += e_diag
                        sup = e_sub
                    if jj == n_int - 1:
                        diag += e_diag
                        sub = e_sub
                    piv = diag - sub * cp[jj - 1, k] if jj > 0 else diag
                    nrm = piv.real * piv.real + piv.imag * piv.imag
                    if nrm < PIVOT_TOL * PIVOT_TOL or not nrm > 0.0:
                        failed = b0 + k
                        nrm = 1.0
                    r = 1.0 / nrm
                    iv = complex(piv.real * r, -piv.imag * r)
                    inv[jj, k] = iv
                    cp[jj, k] = sup * iv
                    if jj == 0:
                        u[0, 1, b0 + k] = u[0, 1, b0 + k] * iv
                    else:
                        u[0, jj + 1, b0 + k] = (u[0, jj + 1, b0 + k] - sub * u[0, jj, b0 + k]) * iv
            if failed >= 0:
                status[failed] = failed  # ntask == B when A == 1
                continue
            for jj in range(n_int - 2, -1, -1):
                for k in range(nb):
                    u[0, jj + 1, b0 + k] -= cp[jj, k] * u[0, jj + 2, b0 + k]
            for k in range(nb):
                bb = b0 + k
                u[0, 0, bb] = -(p1 * u[0, 1, bb] + p2 * u[0, 2, bb]) / p0
                u[0, m - 1, bb] = -(p1 * u[0, m - 2, bb] + p2 * u[0, m - 3, bb]) / p0
        return
    for task in prange(ntask):
        b = task // nblk
        a0 = (task % nblk) * _BLOCK
        a1 = min(a0 + _BLOCK, A)
        status[task] = -1
        inv = np.empty(max(m - 2, 1), dtype=np.complex128)
        cp = np.empty(max(m - 2, 1), dtype=np.complex128)
        for a in range(a0, a1):
            d1 = 1.0 - 2.0 * c
            if has_shift:
                d1 += scale * shift[a, 1, b]
            if m == 3:
                det, x0, x1, x2 = _solve3(p0, p1, p2, c, d1, c, p2, p1, p0, 0.0, u[a, 1, b], 0.0)
                if abs(det) < PIVOT_TOL:
                    status[task] = a + A * b
                    break
                u[a, 0, b] = x0
                u[a, 1, b] = x1
                u[a, 2, b] = x2
                continue
            bad = _line_factors(m, c, shift[a, :, b], scale, has_shift, e_sub, e_diag, inv, cp)
            if bad >= 0:
                status[task] = a + A * b
                break
            _apply_line(u, a, b, m, c, e_sub, p0, p1, p2, inv, cp)


def _axis_view(values: np.ndarray, axis: int) -> np.ndarray:
    n = values.shape
    A = int(np.prod(n[:axis])) if axis > 0 else 1
    B = int(np.prod(n[axis + 1 :])) if axis + 1 < len(n) else 1
    view = values.reshape((A, n[axis], B), order="F")
    if not np.shares_memory(view, values):
        raise RuntimeError("field array is not Fortran-contiguous")
    return view


@dataclass
class ParaxialProblem:
    grid: Grid
    beta: RefractionField
    kappa: float
    initial: ComplexField

    def __post_init__(self):
        if self.kappa <= 0:
            raise ValueError("kappa must be positive")
        if self.beta.grid != self.grid or self.initial.grid != self.grid:
            raise GridMismatchError("problem fields must share the problem grid")
        # beta - 1 laid out for the axis-1 sweep
        self._beta_m1 = np.asfortranarray(self.beta.beta - 1.0)
        self._zero_beta = bool(np.all(self._beta_m1 == 0.0))


def _sweep_axis(values: np.ndarray, prob: ParaxialProblem, axis: int, dt: float) -> None:
    grid = prob.grid
    h = grid.spacing[axis]
    kappa = prob.kappa
    c = -1j * dt / (kappa**2 * h**2)
    p0 = kappa + 1.5j / h
    p1 = -2j / h
    p2 = 0.5j / h
    view = _axis_view(values, axis)
    if axis == 0 and not prob._zero_beta:
        shift = _axis_view(prob._beta_m1, 0)
        has_shift = True
    else:
        shift = np.zeros((1, 1, 1))
        has_shift = False
    A, _, B = view.shape
    status = np.empty(((A + _BLOCK - 1) // _BLOCK) * B, dtype=np.int64)
    _sweep(view, shift, -1j * dt, has_shift, c, p0, p1, p2, status)
    bad = status[status >= 0]
    if bad.size:
        raise SingularLineError(axis, int(bad.min()))


def adi_step(u_n: ComplexField, prob: ParaxialProblem, dt: float) -> ComplexField:
    """One BDF1-ADI step of size ``dt``; returns a new field."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    if u_n.grid != prob.grid:
        raise GridMismatchError("field grid differs from problem grid")
    values = np.array(u_n.values, dtype=complex, order="F", copy=True)
    for axis in range(prob.grid.dim):
        _sweep_axis(values, prob, axis, dt)
    return ComplexField(prob.grid, values)


def _adi_inplace(values: np.ndarray, prob: ParaxialProblem, dt: float) -> None:
    for axis in range(prob.grid.dim):
        _sweep_axis(values, prob, axis, dt)


# ---------------------------------------------------------------------------
# time marching


class StopKind(str, Enum):
    FIXED = "fixed_schedule"
    UB = "ub_threshold"
    RESIDUAL = "residual_threshold"


@dataclass(frozen=True)
class StoppingRule:
    """When to end a pseudo-time march before the last schedule node.

    ``ub_threshold`` stops once ``max|u| / (sigma sqrt(t)) <= 10 tol``, the
    truncation heuristic for a target relative error ``tol``.
    ``residual_threshold`` stops once a caller-supplied residual of the running
    sum drops to ``tol``; it is evaluated every ``check_every`` steps.
    """

    kind: StopKind = StopKind.FIXED
    tol: float = 0.0
    check_every: int = 10

    def __post_init__(self):
        object.__setattr__(self, "kind", StopKind(self.kind))
        if self.kind is not StopKind.FIXED and not self.tol > 0:
            raise ValueError("threshold stopping rules need tol > 0")
        if self.check_every < 1:
            raise ValueError("check_every must be >= 1")

    @classmethod
    def fixed(cls) -> "StoppingRule":
        return cls(StopKind.FIXED)


@dataclass
class EvolveReport:
    steps: int
    t_reached: float
    final_max_norm: float
    truncated: bool
    evaluations: list = field(default_factory=list)
    wall_time: float = 0.0


def evolve(initial: ComplexField, prob: ParaxialProblem, dts, callback: Callable | None = None) -> ComplexField:
    """March ``initial`` through the given step sizes; no accumulation.

    ``callback(n, t_n, values)`` is called after every step when given.
    """
    values = np.array(initial.values, dtype=complex, order="F", copy=True)
    t = 0.0
    for n, dt in enumerate(dts):
        _adi_inplace(values, prob, float(dt))
        t += float(dt)
        if callback is not None:
            callback(n + 1, t, values)
    return ComplexField(prob.grid, values)


def evolve_and_accumulate(
    prob: ParaxialProblem,
    sched: TimeStepSchedule,
    weights: QuadratureWeights,
    stop: StoppingRule | None = None,
    *,
    sigma: float | None = None,
    residual_fn: Callable[[np.ndarray], float] | None = None,
) -> tuple[ComplexField, EvolveReport]:
    """Approximate the inverse square-root operator applied to ``prob.initial``.

    Marches ``u^0 = initial`` through the schedule and streams
    ``sum_n omega_n u^n``. Only the current snapshot and the running sum are
    held in memory. ``sigma`` defaults to ``1/(kappa L_max)`` for the ub rule;
    ``residual_fn`` maps the running sum to a relative residual for the
    residual rule (without it that rule runs the full schedule).
    """
    if weights.schedule is not sched and len(weights.omega) != len(sched.nodes):
        raise ValueError("weights were not built from this schedule")
    stop = stop or StoppingRule.fixed()
    if sigma is None:
        sigma = 1.0 / (prob.kappa * max(prob.grid.lengths))
    start = time.perf_counter()
    values = np.array(prob.initial.values, dtype=complex, order="F", copy=True)
    acc = OftAccumulator(weights, prob.grid)
    acc.partial = np.zeros(prob.grid.shape, dtype=complex, order="F")
    acc.accumulate(values)
    dts = step_sizes(sched)
    nodes = sched.nodes
    evaluations = []
    truncated = False
    steps = 0
    for n, dt in enumerate(dts):
        _adi_inplace(values, prob, float(dt))
        acc.accumulate(values)
        steps = n + 1
        if not np.all(np.isfinite(values)):
            raise FloatingPointError(f"non-finite values after step {steps}")
        t_n = float(nodes[steps])
        if stop.kind is StopKind.UB:
            ub = float(np.max(np.abs(values))) / (sigma * math.sqrt(t_n))
            evaluations.append((steps, t_n, ub))
            if ub <= 10.0 * stop.tol:
                truncated = steps < sched.N
                break
        elif stop.kind is StopKind.RESIDUAL and residual_fn is not None:
            if steps % stop.check_every == 0 or steps == sched.N:
                res = float(residual_fn(acc.partial))
                evaluations.append((steps, t_n, res))
                if res <= stop.tol:
                    truncated = steps < sched.N
                    break
    report = EvolveReport(
        steps=steps,
        t_reached=float(nodes[steps]),
        final_max_norm=float(np.max(np.abs(values))),
        truncated=truncated,
        evaluations=evaluations,
        wall_time=time.perf_counter() - start,
    )
    return acc.result(), report
