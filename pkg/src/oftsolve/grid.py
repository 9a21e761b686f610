"""Uniform tensor-product grids, grid fields and the shared stencils.

Field values are stored as numpy arrays of shape ``grid.n`` (axis 1 first).
The canonical flattened ordering has axis 1 varying fastest, which is numpy
Fortran order; :meth:`ComplexField.flat` and :func:`linear_index` follow it.

Boundary closure
----------------
Every face carries the first-order non-reflecting condition
``u + (i/kappa) du/dn = 0``. The outward normal derivative is discretized with
the three-point one-sided stencil ``(3 u_0 - 4 u_1 + u_2) / (2 h)`` measured
inward from the face. :func:`discrete_helmholtz_apply` returns the interior
Helmholtz operator and, on boundary points, this Robin operator; that is the
system the pseudo-time solver actually enforces.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from math import prod

import numpy as np

__all__ = [
    "Grid",
    "ComplexField",
    "RefractionField",
    "GridMismatchError",
    "linear_index",
    "multi_index",
    "second_difference_axis",
    "normal_derivative",
    "robin_operator",
    "discrete_helmholtz_apply",
    "boundary_mask",
]


class GridMismatchError(ValueError):
    """Fields defined on different grids were combined."""


@dataclass(frozen=True)
class Grid:
    """Uniform grid over ``[lower, upper]`` per axis with ``n`` points per axis."""

    lower: tuple[float, ...]
    upper: tuple[float, ...]
    n: tuple[int, ...]

    def __post_init__(self):
        lower = tuple(float(v) for v in np.atleast_1d(self.lower))
        upper = tuple(float(v) for v in np.atleast_1d(self.upper))
        n = tuple(int(v) for v in np.atleast_1d(self.n))
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)
        object.__setattr__(self, "n", n)
        if not (len(lower) == len(upper) == len(n)):
            raise ValueError("lower, upper and n must have the same length")
        if len(n) not in (1, 2, 3):
            raise ValueError(f"grid dimension must be 1, 2 or 3, got {len(n)}")
        for d, (lo, hi, m) in enumerate(zip(lower, upper, n)):
            if m < 3:
                raise ValueError(f"axis {d}: need at least 3 points, got {m}")
            if not hi > lo:
                raise ValueError(f"axis {d}: upper bound must exceed lower bound")

    @classmethod
    def cube(cls, dim: int, lo: float, hi: float, n: int) -> "Grid":
        return cls((lo,) * dim, (hi,) * dim, (n,) * dim)

    @property
    def dim(self) -> int:
        return len(self.n)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.n

    @property
    def size(self) -> int:
        return prod(self.n)

    @property
    def spacing(self) -> tuple[float, ...]:
        return tuple((hi - lo) / (m - 1) for lo, hi, m in zip(self.lower, self.upper, self.n))

    @property
    def lengths(self) -> tuple[float, ...]:
        return tuple(hi - lo for lo, hi in zip(self.lower, self.upper))

    def axis(self, d: int) -> np.ndarray:
        return np.linspace(self.lower[d], self.upper[d], self.n[d])

    def coords(self) -> tuple[np.ndarray, ...]:
        """Broadcastable coordinate arrays, one per axis."""
        return tuple(np.meshgrid(*(self.axis(d) for d in range(self.dim)), indexing="ij", sparse=True))

    def zeros(self) -> "ComplexField":
        return ComplexField(self, np.zeros(self.n, dtype=complex))


@dataclass
class ComplexField:
    """Complex samples at every point of ``grid``; ``values.shape == grid.n``."""

    grid: Grid
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=complex)
        if vals.shape != self.grid.shape:
            if vals.size == self.grid.size and vals.ndim == 1:
                vals = vals.reshape(self.grid.shape, order="F")
            else:
                raise GridMismatchError(f"values shape {vals.shape} does not match grid {self.grid.shape}")
        self.values = vals

    @classmethod
    def from_function(cls, grid: Grid, func) -> "ComplexField":
        vals = np.broadcast_to(func(*grid.coords()), grid.shape)
        return cls(grid, np.array(vals, dtype=complex))

    def flat(self) -> np.ndarray:
        """Values in linear-index order (axis 1 fastest)."""
        return self.values.ravel(order="F")

    def max_abs(self) -> float:
        return float(np.max(np.abs(self.values)))

    def copy(self) -> "ComplexField":
        return ComplexField(self.grid, self.values.copy())

    def _check(self, other: "ComplexField"):
        if other.grid != self.grid:
            raise GridMismatchError("fields live on different grids")

    def __add__(self, other):
        self._check(other)
        return ComplexField(self.grid, self.values + other.values)

    def __sub__(self, other):
        self._check(other)
        return ComplexField(self.grid, self.values - other.values)

    def __mul__(self, scalar):
        return ComplexField(self.grid, self.values * scalar)

    __rmul__ = __mul__


@dataclass
class RefractionField:
    """Real refraction coefficient beta > 0 sampled on ``grid``."""

    grid: Grid
    beta: np.ndarray = field(repr=False)

    def __post_init__(self):
        beta = np.asarray(self.beta, dtype=float)
        if beta.ndim == 0:
            beta = np.full(self.grid.shape, float(beta))
        if beta.shape != self.grid.shape:
            raise GridMismatchError(f"beta shape {beta.shape} does not match grid {self.grid.shape}")
        if not np.all(beta > 0):
            raise ValueError("refraction coefficient must be strictly positive")
        self.beta = beta

    @classmethod
    def uniform(cls, grid: Grid, value: float = 1.0) -> "RefractionField":
        return cls(grid, np.full(grid.shape, float(value)))

    @classmethod
    def from_function(cls, grid: Grid, func) -> "RefractionField":
        return cls(grid, np.array(np.broadcast_to(func(*grid.coords()), grid.shape), dtype=float))

    def is_uniform_one(self) -> bool:
        return bool(np.all(self.beta == 1.0))


def linear_index(grid: Grid, index) -> int:
    """Map a multi-index to its flat position (axis 1 fastest)."""
    index = tuple(int(i) for i in index)
    if len(index) != grid.dim:
        raise IndexError(f"expected {grid.dim} indices, got {len(index)}")
    flat, stride = 0, 1
    for d, (i, m) in enumerate(zip(index, grid.n)):
        if not 0 <= i < m:
            raise IndexError(f"index {i} out of range [0, {m}) on axis {d}")
        flat += i * stride
        stride *= m
    return flat


def multi_index(grid: Grid, flat: int) -> tuple[int, ...]:
    """Inverse of :func:`linear_index`."""
    if not 0 <= flat < grid.size:
        raise IndexError(f"flat index {flat} out of range [0, {grid.size})")
    out = []
    for m in grid.n:
        out.append(flat % m)
        flat //= m
    return tuple(out)


def _check_axis(grid: Grid, axis: int):
    if not 0 <= axis < grid.dim:
        raise ValueError(f"axis {axis} invalid for a {grid.dim}-D grid")


def _take(a: np.ndarray, axis: int, idx) -> np.ndarray:
    sl = [slice(None)] * a.ndim
    sl[axis] = idx
    return a[tuple(sl)]


def normal_derivative(f: ComplexField, axis: int) -> tuple[np.ndarray, np.ndarray]:
    """Outward normal derivative on the low and high faces of ``axis``.

    Second-order one-sided stencils; each returned array has the face shape.
    """
    _check_axis(f.grid, axis)
    u = f.values
    h = f.grid.spacing[axis]
    low = (3 * _take(u, axis, 0) - 4 * _take(u, axis, 1) + _take(u, axis, 2)) / (2 * h)
    high = (3 * _take(u, axis, -1) - 4 * _take(u, axis, -2) + _take(u, axis, -3)) / (2 * h)
    return low, high


def robin_operator(f: ComplexField, axis: int, kappa: float) -> tuple[np.ndarray, np.ndarray]:
    """``u + (i/kappa) du/dn`` on the low and high faces of ``axis``."""
    low, high = normal_derivative(f, axis)
    u = f.values
    return _take(u, axis, 0) + 1j / kappa * low, _take(u, axis, -1) + 1j / kappa * high


def second_difference_axis(f: ComplexField, axis: int, kappa: float) -> np.ndarray:
    """Second difference of ``f`` along ``axis``.

    Interior points get the centered stencil. On the two faces the value is
    the one-sided Taylor closure ``2 (u_1 - u_0)/h^2 + 2 u_n' / h`` with the
    outward normal derivative taken from the non-reflecting condition,
    ``u_n' = i kappa u_0``. For a field satisfying the discrete condition this
    equals the centered stencil one cell in.
    """
    _check_axis(f.grid, axis)
    u = f.values
    h = f.grid.spacing[axis]
    out = np.empty_like(u)
    inner = [slice(None)] * u.ndim
    inner[axis] = slice(1, -1)
    out[tuple(inner)] = (
        _take(u, axis, slice(2, None)) - 2 * _take(u, axis, slice(1, -1)) + _take(u, axis, slice(0, -2))
    ) / h**2
    for face, nxt in ((0, 1), (-1, -2)):
        u0 = _take(u, axis, face)
        u1 = _take(u, axis, nxt)
        sl = [slice(None)] * u.ndim
        sl[axis] = face
        out[tuple(sl)] = 2 * (u1 - u0) / h**2 + 2j * kappa * u0 / h
    return out


def boundary_mask(grid: Grid) -> np.ndarray:
    """Boolean array, True on every point lying on some face."""
    mask = np.zeros(grid.shape, dtype=bool)
    for d in range(grid.dim):
        sl = [slice(None)] * grid.dim
        for face in (0, -1):
            sl[d] = face
            mask[tuple(sl)] = True
    return mask


def discrete_helmholtz_apply(v: ComplexField, beta: RefractionField, kappa: float) -> ComplexField:
    """Apply the discrete operator ``beta + Laplacian/kappa^2`` with its closure.

    Points interior to every axis receive ``beta v + sum_d delta_d^2 v / kappa^2``.
    Boundary points receive the Robin operator of the face they lie on; on
    edges and corners the face of the highest axis wins (the last sweep
    direction of the time stepper). A field satisfying the boundary condition
    therefore has zero boundary rows.
    """
    if beta.grid != v.grid:
        raise GridMismatchError("refraction field and v live on different grids")
    grid = v.grid
    u = v.values
    out = beta.beta * u
    for d in range(grid.dim):
        h = grid.spacing[d]
        inner = [slice(None)] * grid.dim
        inner[d] = slice(1, -1)
        lap = (_take(u, d, slice(2, None)) - 2 * _take(u, d, slice(1, -1)) + _take(u, d, slice(0, -2))) / h**2
        out[tuple(inner)] += lap / kappa**2
    for d in range(grid.dim):
        low, high = robin_operator(v, d, kappa)
        for face, vals in ((0, low), (-1, high)):
            sl = [slice(None)] * grid.dim
            sl[d] = face
            out[tuple(sl)] = vals
    return ComplexField(grid, out)
