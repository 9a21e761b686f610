"""Exponentially growing pseudo-time steps, t_n = a (b^n - 1)."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = ["TimeStepSchedule", "DegenerateRatioError", "build_schedule", "step_sizes", "uniform_schedule"]


class DegenerateRatioError(ValueError):
    """Final/initial step ratio does not exceed 1, so the nodes cannot grow."""


@dataclass(frozen=True)
class TimeStepSchedule:
    a: float
    b: float
    nodes: np.ndarray
    dt0: float
    dtT: float
    T: float

    @property
    def N(self) -> int:
        return len(self.nodes) - 1

    @property
    def R(self) -> float:
        return self.dtT / self.dt0 - 1.0

    @property
    def t_final(self) -> float:
        return float(self.nodes[-1])


def build_schedule(dt0: float, dtT: float, T: float, n_steps: int | None = None) -> TimeStepSchedule:
    """Nodes with first step ``dt0`` and step ``dtT`` near time ``T``.

    ``a = T/R``, ``b = 1 + R dt0/T`` with ``R = dtT/dt0 - 1``. By default N is
    the smallest integer with ``t_N >= T``. Passing ``n_steps`` keeps the same
    (a, b) but marches exactly that many steps, possibly well past ``T``.
    """
    if not (dt0 > 0 and dtT > 0 and T > 0):
        raise ValueError("dt0, dtT and T must be positive")
    R = dtT / dt0 - 1.0
    if R <= 0:
        raise DegenerateRatioError(f"dtT={dtT} must exceed dt0={dt0} (R={R})")
    if T <= dtT:
        raise ValueError(f"T={T} must exceed dtT={dtT}")
    a = T / R
    b = 1.0 + R * dt0 / T
    log_b = math.log1p(R * dt0 / T)
    if n_steps is None:
        n = max(1, math.ceil(math.log1p(R) / log_b))
        # guard the ceil against rounding in either direction
        while n > 1 and a * math.expm1((n - 1) * log_b) >= T:
            n -= 1
        while a * math.expm1(n * log_b) < T:
            n += 1
    else:
        n = int(n_steps)
        if n < 1:
            raise ValueError("n_steps must be at least 1")
    nodes = a * np.expm1(np.arange(n + 1) * log_b)
    return TimeStepSchedule(a=a, b=b, nodes=nodes, dt0=dt0, dtT=dtT, T=T)


def uniform_schedule(dt: float, n_steps: int) -> TimeStepSchedule:
    """Equally spaced nodes; the ``b -> 1`` limit, used for cross-checks."""
    nodes = dt * np.arange(n_steps + 1, dtype=float)
    return TimeStepSchedule(a=math.inf, b=1.0, nodes=nodes, dt0=dt, dtT=dt, T=float(nodes[-1]))


def step_sizes(sched: TimeStepSchedule) -> np.ndarray:
    """``dt_n = t_{n+1} - t_n`` for n = 0..N-1."""
    if not math.isfinite(sched.a):
        return np.diff(sched.nodes)
    # dt_n = a (b - 1) b^n computed directly avoids cancellation in the difference
    n = np.arange(sched.N)
    return sched.a * math.expm1(math.log(sched.b)) * np.exp(n * math.log(sched.b))
