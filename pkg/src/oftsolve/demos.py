"""Worked examples: two model ODEs solved through pseudo-time, and a Luneburg lens.

ode1
    ``v - i v'' = (1 + i pi^2) sin(pi x)`` on [0, 1], ``v = sin(pi x)``.
    ``v = int_0^inf e^{-t} u(t) dt`` with ``u_t = i u_xx``, Dirichlet ends.
    FTCS for the first step, leapfrog afterwards, trapezoid-weighted sum
    ``dt/2 u^0 + dt sum_{n=1}^{N-1} e^{-n dt} u^n``.
ode2
    ``v - v'' = (3 - 4x^2) e^{-x^2}`` on the line, ``v = e^{-x^2}``.
    ``v = 1/2 int_0^inf e^{-t} (g(x+t) + g(x-t)) dt`` with the two shifts
    produced by first-order upwind advection; sum
    ``dt/4 (u^0 + w^0) + dt/2 sum_{n=1}^{N-1} e^{-n dt} (u^n + w^n)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit

from .config import SolverConfig

__all__ = ["DemoResult", "run_ode1", "run_ode2", "ode2_quadrature_only", "luneburg_config", "run_luneburg", "LuneburgResult"]


@dataclass
class DemoResult:
    dx: float
    dt: float
    steps: int
    max_error: float
    x: np.ndarray
    v: np.ndarray


@njit(cache=True)
def _ode1_kernel(g, dx, dt, N):
    J = g.shape[0] - 1
    r = 1j * dt / dx**2
    prev = g.copy()
    v = 0.5 * dt * prev
    cur = np.zeros_like(g)
    # forward-time centred-space first step
    for j in range(1, J):
        cur[j] = prev[j] + r * (prev[j + 1] - 2 * prev[j] + prev[j - 1])
    nxt = np.zeros_like(g)
    for n in range(1, N):
        w = dt * math.exp(-n * dt)
        for j in range(J + 1):
            v[j] += w * cur[j]
        for j in range(1, J):
            nxt[j] = prev[j] + 2 * r * (cur[j + 1] - 2 * cur[j] + cur[j - 1])
        prev, cur, nxt = cur, nxt, prev
    return v


def run_ode1(J: int = 50, dt: float | None = None, t_final: float = 36.0) -> DemoResult:
    """Leapfrog pseudo-time solve of ``v - i v'' = g``; ``dt`` defaults to ``dx^2/8``.

    Leapfrog for ``u_t = i u_xx`` is stable for ``dt < dx^2/4``.
    """
    dx = 1.0 / J
    if dt is None:
        dt = dx * dx / 8
    if dt >= dx * dx / 4:
        raise ValueError(f"dt={dt} violates the leapfrog stability limit dx^2/4={dx * dx / 4}")
    N = int(math.ceil(t_final / dt))
    x = np.linspace(0.0, 1.0, J + 1)
    g = ((1 + 1j * math.pi**2) * np.sin(math.pi * x)).astype(np.complex128)
    g[0] = g[-1] = 0.0
    v = _ode1_kernel(g, dx, dt, N)
    err = float(np.max(np.abs(v - np.sin(math.pi * x))))
    return DemoResult(dx, dt, N, err, x, v)


@njit(cache=True)
def _ode2_kernel(g, dx, dt, N):
    M = g.shape[0]
    u = g.copy()
    w = g.copy()
    v = 0.25 * dt * (u + w)
    c = dt / dx
    un = np.empty_like(u)
    wn = np.empty_like(w)
    for n in range(1, N):
        # advance to level n
        for j in range(M - 1):
            un[j] = u[j] + c * (u[j + 1] - u[j])
        un[M - 1] = 0.0
        wn[0] = 0.0
        for j in range(1, M):
            wn[j] = w[j] - c * (w[j] - w[j - 1])
        u, un = un, u
        w, wn = wn, w
        wt = 0.5 * dt * math.exp(-n * dt)
        for j in range(M):
            v[j] += wt * (u[j] + w[j])
    return v


def ode2_source(x):
    return (3 - 4 * x**2) * np.exp(-(x**2))


def run_ode2(dx: float = 0.05, cfl: float = 1.0, x_max: float = 12.0, t_final: float = 36.0) -> DemoResult:
    """Upwind pseudo-time solve of ``v - v'' = g`` on ``[-x_max, x_max]``."""
    if not 0 < cfl <= 1:
        raise ValueError("upwind needs 0 < cfl <= 1")
    dt = cfl * dx
    J = int(round(x_max / dx))
    x = dx * np.arange(-J, J + 1)
    N = int(math.ceil(t_final / dt))
    g = ode2_source(x).astype(float)
    v = _ode2_kernel(g, dx, dt, N)
    err = float(np.max(np.abs(v - np.exp(-(x**2)))))
    return DemoResult(dx, dt, N, err, x, v)


def ode2_quadrature_only(x: np.ndarray, dt: float, N: int) -> np.ndarray:
    """The same trapezoid sum applied to the exact shifts ``g(x +- t_n)``."""
    v = 0.25 * dt * 2 * ode2_source(x)
    for n in range(1, N):
        t = n * dt
        v = v + 0.5 * dt * math.exp(-t) * (ode2_source(x + t) + ode2_source(x - t))
    return v


# ---------------------------------------------------------------------------
# Luneburg lens


def luneburg_config(
    kappa: float = 10.0,
    n: tuple[int, int, int] = (120, 120, 150),
    dt0: float = 2e-3,
    dtT_ratio: float = 200.0,
    output_path: str = "luneburg.oftf",
) -> SolverConfig:
    """Unit lens ``beta = 2 - r^2`` in ``[-2,2]^2 x [-2,3]``, plane wave along +x3.

    The lens focuses onto the far pole ``(0, 0, 1)``; the domain is longest
    along the propagation axis to leave room behind the focus.
    """
    return SolverConfig(
        dim=3,
        lower=(-2.0, -2.0, -2.0),
        upper=(2.0, 2.0, 3.0),
        n=tuple(n),
        kappa=kappa,
        dt0=dt0,
        dtT_ratio=dtT_ratio,
        refraction={"kind": "luneburg", "center": "0, 0, 0", "radius": "1"},
        incident={"kind": "plane", "direction": "0, 0, 1"},
        output_path=output_path,
        output_format="oftf",
    )


@dataclass
class LuneburgResult:
    peak_value: float
    peak_location: tuple[float, float, float]
    distance_to_focus: float
    wavelength: float
    report: object
    total: object


def run_luneburg(cfg: SolverConfig | None = None) -> LuneburgResult:
    from .grid import ComplexField
    from .helmholtz import build_source, solve_helmholtz

    cfg = cfg or luneburg_config()
    grid = cfg.grid
    beta = cfg.refraction_field()
    inc = cfg.incident_field()
    g = build_source(beta, inc)
    sched = cfg.schedule()
    v, report = solve_helmholtz(g, beta, cfg.kappa, sched, cfg.weights(sched), cfg.stopping_rule())
    total = ComplexField(grid, v.values + inc.evaluate(grid).values)
    mag = np.abs(total.values)
    idx = np.unravel_index(int(np.argmax(mag)), mag.shape)
    loc = tuple(float(grid.axis(d)[i]) for d, i in enumerate(idx))
    dist = float(np.linalg.norm(np.subtract(loc, (0.0, 0.0, 1.0))))
    return LuneburgResult(float(mag[idx]), loc, dist, 2 * math.pi / cfg.kappa, report, total)
