"""Product-integration weights for the inverse square-root transform.

The transform integral

    sqrt(-i/pi) int_0^inf e^{i tau} tau^{-1/2} u(tau) d tau

is approximated by interpolating ``u`` linearly between schedule nodes and
integrating the kernel exactly on every panel. ``w1(a, b)`` and ``w2(a, b)``
are the kernel moments against the two hat functions of panel (a, b); they
are expressed through the Fresnel integrals of :mod:`oftsolve.special`.
``sqrt(-i)`` is the principal root ``e^{-i pi/4}``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .grid import ComplexField, GridMismatchError
from .schedule import TimeStepSchedule
from .special import fresnel

__all__ = [
    "SQRT_MINUS_I_OVER_PI",
    "panel_weights",
    "composite_weights",
    "QuadratureWeights",
    "OftAccumulator",
    "AccumulatorOverrun",
    "TAYLOR_SWITCH",
]

SQRT_MINUS_I_OVER_PI = np.exp(-0.25j * np.pi) / math.sqrt(math.pi)
_PREFACTOR = (1 + 1j) / math.sqrt(2 * math.pi)

# The closed form loses about max(b / (b - a), a / (b - a)^2) digits to
# cancellation. Relatively short panels use a Taylor expansion about ``a``;
# the remaining panels near the origin expand ``e^{i tau}`` instead.
TAYLOR_SWITCH = 0.3
TAYLOR_MAX_WIDTH = 1.0
SERIES_MAX_RIGHT = 2.0


def _fresnel_complex(x: float) -> complex:
    c, s = fresnel(x)
    return complex(c, s)


def _kernel_derivatives(a: float, kmax: int) -> list[complex]:
    """Derivatives 0..kmax of ``e^{i tau} tau^{-1/2}`` at ``tau = a > 0``."""
    # d^j tau^{-1/2} = p_j tau^{-1/2-j}
    p = [1.0]
    for j in range(1, kmax + 1):
        p.append(p[-1] * (0.5 - j))
    powd = [p[j] * a ** (-0.5 - j) for j in range(kmax + 1)]
    out = []
    for k in range(kmax + 1):
        acc = 0j
        for j in range(k + 1):
            acc += math.comb(k, j) * (1j) ** (k - j) * powd[j]
        out.append(acc * complex(math.cos(a), math.sin(a)))
    return out


def _panel_taylor(a: float, b: float) -> tuple[complex, complex]:
    h = b - a
    # few terms suffice for short panels; retry with more if the series has not settled
    for kmax in (8, 40, 80):
        derivs = _kernel_derivatives(a, kmax)
        w1 = 0j
        w2 = 0j
        scale = h
        converged = False
        for k in range(kmax + 1):
            term = derivs[k] * scale
            t1 = term / ((k + 1) * (k + 2))
            t2 = term / (k + 2)
            w1 += t1
            w2 += t2
            if abs(t2) < 1e-18 * abs(w2) and k >= 3:
                converged = True
                break
            scale *= h / (k + 1)
        if converged:
            break
    return SQRT_MINUS_I_OVER_PI * w1, SQRT_MINUS_I_OVER_PI * w2


def _panel_series(a: float, b: float) -> tuple[complex, complex]:
    """Expand ``e^{i tau}`` and integrate ``tau^{m - 1/2}`` against the hats exactly."""
    h = b - a
    q = a / b

    def moment(m):
        # int_a^b tau^{m - 1/2} d tau
        e = m + 0.5
        return b**e * (1.0 - q**e) / e

    w1 = 0j
    w2 = 0j
    coef = 1 + 0j
    i_m = moment(0)
    for m in range(80):
        i_next = moment(m + 1)
        t1 = coef * (b * i_m - i_next)
        t2 = coef * (i_next - a * i_m)
        w1 += t1
        w2 += t2
        if m >= 3 and abs(t1) + abs(t2) < 1e-18 * (abs(w1) + abs(w2)):
            break
        coef *= 1j / (m + 1)
        i_m = i_next
    return SQRT_MINUS_I_OVER_PI * w1 / h, SQRT_MINUS_I_OVER_PI * w2 / h


def _panel_closed(a: float, b: float) -> tuple[complex, complex]:
    sa, sb = math.sqrt(a), math.sqrt(b)
    ea = sa * complex(math.cos(a), math.sin(a))
    eb = sb * complex(math.cos(b), math.sin(b))
    dF = _fresnel_complex(sb) - _fresnel_complex(sa)
    pref = _PREFACTOR / (b - a)
    w1 = pref * (eb - ea - (1 + 2j * b) * dF)
    w2 = pref * (ea - eb + (1 + 2j * a) * dF)
    return w1, w2


def panel_weights(ta: float, tb: float) -> tuple[complex, complex]:
    """Kernel moments ``(w1, w2)`` of the panel ``(ta, tb)``.

    ``w1`` pairs with the left node value and ``w2`` with the right one.
    """
    if not (ta >= 0 and tb > ta):
        raise ValueError(f"need 0 <= ta < tb, got ({ta}, {tb})")
    if ta > 0 and (tb - ta) / ta < TAYLOR_SWITCH and tb - ta <= TAYLOR_MAX_WIDTH:
        return _panel_taylor(ta, tb)
    if tb <= SERIES_MAX_RIGHT:
        return _panel_series(ta, tb)
    return _panel_closed(ta, tb)


@dataclass
class QuadratureWeights:
    schedule: TimeStepSchedule
    omega: np.ndarray = field(repr=False)

    def __len__(self):
        return len(self.omega)

    def to_csv(self, path) -> None:
        """Dump ``n,t_n,re,im`` rows for inspection."""
        with open(path, "w") as fh:
            fh.write("n,t_n,re_omega,im_omega\n")
            for n, (t, w) in enumerate(zip(self.schedule.nodes, self.omega)):
                fh.write(f"{n},{t:.17g},{w.real:.17g},{w.imag:.17g}\n")


def composite_weights(sched: TimeStepSchedule) -> QuadratureWeights:
    """Node weights of the composite piecewise-linear rule on ``sched``."""
    nodes = np.asarray(sched.nodes, dtype=float)
    N = len(nodes) - 1
    if N < 1:
        raise ValueError("schedule must contain at least one step")
    omega = np.zeros(N + 1, dtype=complex)
    for n in range(N):
        w1, w2 = panel_weights(float(nodes[n]), float(nodes[n + 1]))
        omega[n] += w1
        omega[n + 1] += w2
    return QuadratureWeights(sched, omega)


class AccumulatorOverrun(RuntimeError):
    """More snapshots were pushed than the schedule has nodes."""


class OftAccumulator:
    """Streaming ``sum_n omega_n u^n``; holds one partial field only."""

    def __init__(self, weights: QuadratureWeights, grid):
        self.weights = weights
        self.grid = grid
        self.partial = np.zeros(grid.shape, dtype=complex)
        self.n_done = 0

    def accumulate(self, u_n) -> "OftAccumulator":
        values = u_n.values if isinstance(u_n, ComplexField) else np.asarray(u_n)
        if isinstance(u_n, ComplexField) and u_n.grid != self.grid:
            raise GridMismatchError("snapshot grid differs from accumulator grid")
        if values.shape != self.partial.shape:
            raise GridMismatchError("snapshot shape differs from accumulator grid")
        if self.n_done >= len(self.weights.omega):
            raise AccumulatorOverrun(f"all {len(self.weights.omega)} weights already used")
        self.partial += self.weights.omega[self.n_done] * values
        self.n_done += 1
        return self

    def result(self) -> ComplexField:
        return ComplexField(self.grid, self.partial.copy())
