"""Exact solutions on boxes with non-reflecting faces.

On ``[x_l, x_l + L]`` the eigenproblem ``phi'' = -lambda^2 phi`` with
``phi + (i/alpha) dphi/dn = 0`` at both ends has eigenvalues at the roots of

    f(lambda) = (alpha^2 + lambda^2) sin(L lambda) + 2 i alpha lambda cos(L lambda)

and eigenfunctions ``phi = C (cos lambda(x - x_l) - i alpha/lambda sin lambda(x - x_l))``
with ``C = (1 + alpha^2/|lambda|^2)^{-1/2}``. The operator is not self-adjoint,
so the basis is not orthogonal and expansions go through a dense Gram solve.
Tensor products of 1D bases give exact paraxial, ``A^{-1/2} g`` and
``A^{-1} g`` fields on boxes (``beta = 1``, ``A = 1 + Laplacian/kappa^2``).
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .grid import ComplexField, Grid

__all__ = [
    "EigenBasis",
    "ModalExpansion",
    "SeedFailureError",
    "ContourError",
    "ResonanceError",
    "IllConditionedExpansionWarning",
    "char_function",
    "char_derivative",
    "find_eigenvalues",
    "count_roots_in_rectangle",
    "count_roots_in_box",
    "count_roots_on_contour",
    "eigen_inner_product",
    "gram_matrix",
    "fejer1",
    "expand_function",
    "exact_paraxial",
    "exact_v1_v2",
    "asymptotic_decay",
    "default_mode_count",
]


class SeedFailureError(RuntimeError):
    def __init__(self, n: int, seed: complex):
        self.n = n
        self.seed = seed
        super().__init__(f"Newton iteration for eigenvalue {n} (seed {seed:.6g}) did not converge")


class ContourError(RuntimeError):
    """The counting contour keeps passing through a root."""


class ResonanceError(ArithmeticError):
    def __init__(self, mode, value):
        self.mode = mode
        super().__init__(f"modal denominator 1 - Lambda/kappa^2 = {value:.3g} vanishes for mode {mode}")


class IllConditionedExpansionWarning(RuntimeWarning):
    pass


def char_function(lam, alpha: float, L: float):
    lam = np.asarray(lam, dtype=complex)
    return (alpha**2 + lam**2) * np.sin(L * lam) + 2j * alpha * lam * np.cos(L * lam)


def char_derivative(lam, alpha: float, L: float):
    lam = np.asarray(lam, dtype=complex)
    s, c = np.sin(L * lam), np.cos(L * lam)
    return 2 * lam * s + (alpha**2 + lam**2) * L * c + 2j * alpha * c - 2j * alpha * lam * L * s


def _trig_scaled(lam, L: float):
    """``sin(L lam)`` and ``cos(L lam)`` times ``exp(-L |Im lam|)``; finite for any ``lam``."""
    damp = -L * np.abs(lam.imag)
    ep = np.exp(1j * L * lam + damp)
    em = np.exp(-1j * L * lam + damp)
    return (ep - em) / 2j, (ep + em) / 2


def _char_scaled(lam, alpha: float, L: float):
    # a positive rescaling of f: same zeros and same argument
    lam = np.asarray(lam, dtype=complex)
    s, c = _trig_scaled(lam, L)
    return (alpha**2 + lam**2) * s + 2j * alpha * lam * c


def _newton_step(lam, alpha: float, L: float):
    s, c = _trig_scaled(lam, L)
    f = (alpha**2 + lam**2) * s + 2j * alpha * lam * c
    df = 2 * lam * s + (alpha**2 + lam**2) * L * c + 2j * alpha * c - 2j * alpha * lam * L * s
    return f / df


def _is_root(z, alpha: float, L: float, scale):
    z = np.asarray(z, dtype=complex)
    return np.abs(_char_scaled(z, alpha, L)) <= 1e-8 * scale * np.exp(-L * np.abs(z.imag))


def default_mode_count(kappa: float, L: float) -> int:
    return int(math.ceil(3 * kappa * L / math.pi))


# ---------------------------------------------------------------------------
# eigenvalues


@dataclass(frozen=True)
class EigenBasis:
    alpha: float
    L: float
    lambdas: np.ndarray = field(repr=False)
    norm_consts: np.ndarray = field(repr=False)
    x_left: float = 0.0

    @property
    def count(self) -> int:
        return len(self.lambdas)

    def residuals(self) -> np.ndarray:
        return np.abs(char_function(self.lambdas, self.alpha, self.L))

    def evaluate(self, x) -> np.ndarray:
        """Eigenfunction samples, shape ``(len(x), K)``."""
        s = np.asarray(x, dtype=float).reshape(-1, 1) - self.x_left
        lam = self.lambdas.reshape(1, -1)
        return self.norm_consts * (np.cos(lam * s) - 1j * self.alpha / lam * np.sin(lam * s))

    def truncated(self, K: int) -> "EigenBasis":
        return EigenBasis(self.alpha, self.L, self.lambdas[:K], self.norm_consts[:K], self.x_left)

    def shifted(self, x_left: float) -> "EigenBasis":
        return EigenBasis(self.alpha, self.L, self.lambdas, self.norm_consts, float(x_left))


def _newton(z, alpha, L, maxiter=100, tol=1e-14):
    z = np.array(z, dtype=complex)
    done = np.zeros(z.shape, dtype=bool)
    for _ in range(maxiter):
        dz = _newton_step(z, alpha, L)
        bad = ~np.isfinite(dz)
        dz[done | bad] = 0
        z = z - dz
        done |= (np.abs(dz) <= tol * np.maximum(np.abs(z), 1.0)) & ~bad
        if done.all():
            break
    return z, done


def _asymptotic_seed(n: int, alpha: float, L: float) -> complex:
    # tan(L eps) ~ -2 i alpha k / (alpha^2 + k^2); reduces to -2 i n pi / (alpha L) / L for k << alpha
    k = n * math.pi / L
    return k - 2j * alpha * k / (alpha**2 + k**2) / L


def _dedup(roots: np.ndarray, tol: float) -> np.ndarray:
    out: list[complex] = []
    for r in sorted(roots, key=lambda z: (z.real, z.imag)):
        if not any(abs(r - q) <= tol * max(1.0, abs(r)) for q in out):
            out.append(r)
    return np.array(out, dtype=complex)


def find_eigenvalues(alpha: float, L: float, K: int, x_left: float = 0.0, certify: bool = True) -> EigenBasis:
    """First ``K`` eigenvalues with positive real part, sorted by real part.

    Newton is seeded at the asymptotic positions ``n pi / L`` (with a first
    order imaginary correction) and, to catch roots that do not follow the
    asymptotic pattern, on a coarse grid covering the same strip. With
    ``certify`` the result is checked against an argument-principle count.
    """
    if not (alpha > 0 and L > 0 and K >= 1):
        raise ValueError("need alpha > 0, L > 0, K >= 1")
    fscale = lambda z: alpha**2 + abs(z) ** 2 + 2 * alpha * abs(z)  # noqa: E731
    roots = []
    for n in range(1, K + 3):
        seed = _asymptotic_seed(n, alpha, L)
        z, ok = _newton(np.array([seed]), alpha, L)
        z = z[0]
        if not ok[0] or not _is_root(z, alpha, L, fscale(z)):
            # near alpha the asymptotic seed can stall; retry from nearby points
            for s in (n * math.pi / L, n * math.pi / L - 0.5j, n * math.pi / L - 1.0j):
                z2, ok2 = _newton(np.array([s]), alpha, L)
                if ok2[0]:
                    z = z2[0]
                    break
            else:
                raise SeedFailureError(n, seed)
        roots.append(z)
    # grid seeds over the strip 0 < Re < X, -(alpha+1) < Im < 0
    X = (K + 2.5) * math.pi / L
    xs = np.arange(0.25, K + 2.5, 0.5) * math.pi / L
    ys = -np.linspace(0.05, alpha + 1.0, 24)
    grid_seeds = (xs[:, None] + 1j * ys[None, :]).ravel()
    z, ok = _newton(grid_seeds, alpha, L)
    good = ok & _is_root(z, alpha, L, np.vectorize(fscale)(z))
    roots.extend(z[good])
    roots = np.array(roots, dtype=complex)
    roots = roots[(roots.real > 1e-8) & (roots.real < X) & np.isfinite(roots)]
    roots = _dedup(roots, 1e-8)
    if len(roots) < K:
        raise SeedFailureError(len(roots) + 1, _asymptotic_seed(len(roots) + 1, alpha, L))
    # polish
    roots, _ = _newton(roots, alpha, L, maxiter=5, tol=0.0)
    roots = roots[np.argsort(roots.real, kind="stable")]
    lam = roots[:K]
    if certify:
        # the cut between mode K and K+1 must enclose exactly 2K+1 roots (0 and +-lambda_n)
        cut = 0.5 * (roots[K - 1].real + roots[K].real)
        w = count_roots_on_contour(alpha, L, cut, None)
        if w != 2 * K + 1:
            raise RuntimeError(f"eigenvalue enumeration incomplete: contour count {w}, found {2 * K + 1}")
    C = 1.0 / np.sqrt(1.0 + alpha**2 / np.abs(lam) ** 2)
    return EigenBasis(float(alpha), float(L), lam, C, float(x_left))


# ---------------------------------------------------------------------------
# argument principle


def _edge_winding(f, z0: complex, z1: complex, fmin: float) -> float:
    """Total change of arg f along the segment z0 -> z1, refined until smooth."""
    n = 64
    while True:
        s = np.linspace(0.0, 1.0, n + 1)
        vals = f(z0 + (z1 - z0) * s)
        if np.min(np.abs(vals)) < fmin:
            raise ContourError("contour passes through a root")
        dphi = np.angle(vals[1:] / vals[:-1])
        if np.max(np.abs(dphi)) < 0.2 or n > 2**20:
            return float(np.sum(dphi))
        n *= 4


def _box_winding(func, x0: float, x1: float, y0: float, y1: float) -> int:
    """Winding of ``func`` around the box, shifting the contour if it grazes a root."""
    fmin = 1e-8
    for attempt in range(4):
        try:
            corners = [complex(x0, y0), complex(x1, y0), complex(x1, y1), complex(x0, y1)]
            total = 0.0
            for k in range(4):
                total += _edge_winding(func, corners[k], corners[(k + 1) % 4], fmin)
            w = total / (2 * math.pi)
            r = round(w)
            if abs(w - r) > 1e-6:
                raise ContourError(f"non-integer winding {w}")
            return int(r)
        except ContourError:
            grow = 1.0 + 1e-3 * (attempt + 1)
            x0, x1, y0, y1 = x0 * grow, x1 * grow, y0 * grow, y1 * grow
    raise ContourError("contour keeps hitting roots after shifting")


def count_roots_in_box(alpha: float, L: float, x0: float, x1: float, y0: float, y1: float) -> int:
    """Roots of f inside ``x0 < Re z < x1, y0 < Im z < y1`` by the argument principle."""
    if not (x1 > x0 and y1 > y0):
        raise ValueError("empty box")
    return _box_winding(lambda z: _char_scaled(z, alpha, L), x0, x1, y0, y1)


def count_roots_on_contour(alpha: float, L: float, X: float, Y: float | None) -> int:
    """Roots of f inside ``|Re z| < X, |Im z| < Y``.

    Computes ``(1/2 pi i) \\oint f'/f dz`` as the winding of ``f`` around the
    rectangle. ``Y=None`` starts at ``alpha + 1`` and doubles until two
    consecutive counts agree. A contour grazing a root is shifted outward
    slightly and retried.
    """
    func = lambda z: _char_scaled(z, alpha, L)  # noqa: E731
    once = lambda X, Y: _box_winding(func, -X, X, -Y, Y)  # noqa: E731
    if Y is not None:
        return once(X, Y)
    Y = alpha + 1.0
    prev = once(X, Y)
    for _ in range(8):
        Y *= 2
        cur = once(X, Y)
        if cur == prev:
            return cur
        prev = cur
    return prev


def count_roots_in_rectangle(alpha: float, L: float, n: int, Y: float | None = None) -> int:
    """Winding count over ``|Re z| < (n + 1/2) pi / L, |Im z| < Y``."""
    return count_roots_on_contour(alpha, L, (n + 0.5) * math.pi / L, Y)


# ---------------------------------------------------------------------------
# Gram matrix


def _sinc(w):
    w = np.asarray(w, dtype=complex)
    small = np.abs(w) < 1e-4
    out = np.empty_like(w)
    ws = w[~small]
    out[~small] = np.sin(ws) / ws
    w2 = w[small] ** 2
    out[small] = 1 - w2 / 6 + w2**2 / 120
    return out


def _int_cos(z, L):
    """int_0^L cos(z x) dx."""
    return L * _sinc(z * L)


def _int_sin(z, L):
    """int_0^L sin(z x) dx = 2 sin^2(zL/2)/z."""
    return L * np.sin(z * L / 2) * _sinc(z * L / 2)


def _gram_block(lam_m, C_m, lam_n, C_n, alpha, L):
    mu = np.conj(lam_m)[:, None]
    nu = lam_n[None, :]
    cc = 0.5 * (_int_cos(mu - nu, L) + _int_cos(mu + nu, L))
    ss = 0.5 * (_int_cos(mu - nu, L) - _int_cos(mu + nu, L))
    sc = 0.5 * (_int_sin(mu + nu, L) + _int_sin(mu - nu, L))  # sin(mu x) cos(nu x)
    cs = 0.5 * (_int_sin(mu + nu, L) - _int_sin(mu - nu, L))  # cos(mu x) sin(nu x)
    # conj(phi_m) = C_m (cos mu x + i alpha/mu sin mu x), phi_n = C_n (cos nu x - i alpha/nu sin nu x)
    val = cc - 1j * alpha / nu * cs + 1j * alpha / mu * sc + alpha**2 / (mu * nu) * ss
    return np.conj(C_m)[:, None] * C_n[None, :] * val


def eigen_inner_product(basis: EigenBasis, m: int, n: int) -> complex:
    """``(phi_m, phi_n) = int conj(phi_m) phi_n`` in closed form (1-based indices)."""
    if not (1 <= m <= basis.count and 1 <= n <= basis.count):
        raise IndexError("mode index out of range")
    lm, ln = basis.lambdas[m - 1 : m], basis.lambdas[n - 1 : n]
    Cm, Cn = basis.norm_consts[m - 1 : m], basis.norm_consts[n - 1 : n]
    return complex(_gram_block(lm, Cm, ln, Cn, basis.alpha, basis.L)[0, 0])


def gram_matrix(basis: EigenBasis) -> np.ndarray:
    lam, C = basis.lambdas, basis.norm_consts.astype(complex)
    return _gram_block(lam, C, lam, C, basis.alpha, basis.L)


# ---------------------------------------------------------------------------
# quadrature and expansions


def fejer1(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Fejer's first rule on [-1, 1]: Chebyshev-Gauss nodes, interpolatory weights."""
    k = np.arange(1, n + 1)
    theta = (2 * k - 1) * np.pi / (2 * n)
    j = np.arange(1, n // 2 + 1)
    s = np.cos(2 * np.outer(theta, j)) / (4 * j**2 - 1)
    w = (2.0 / n) * (1 - 2 * s.sum(axis=1))
    return np.cos(theta)[::-1], w[::-1]


def _nodes_on(basis: EigenBasis, n: int):
    x, w = fejer1(n)
    half = basis.L / 2
    return basis.x_left + half * (x + 1), half * w


@dataclass
class ModalExpansion:
    bases: tuple[EigenBasis, ...]
    coeffs: np.ndarray = field(repr=False)
    condition: float = 1.0
    ill_conditioned: bool = False
    quad_nodes: int = 0
    reconstruction_error: float = float("nan")

    @property
    def dim(self) -> int:
        return len(self.bases)

    def eigen_sums(self) -> np.ndarray:
        """``Lambda = sum_d lambda_{d,n_d}^2`` on the coefficient tensor's index grid."""
        total = np.zeros(self.coeffs.shape, dtype=complex)
        for d, b in enumerate(self.bases):
            shape = [1] * self.dim
            shape[d] = b.count
            total = total + (b.lambdas**2).reshape(shape)
        return total

    def synthesize(self, coords: Sequence[np.ndarray], multiplier: np.ndarray | None = None) -> np.ndarray:
        """``sum multiplier * c * prod phi`` at the tensor grid ``coords``."""
        c = self.coeffs if multiplier is None else self.coeffs * multiplier
        out = c
        # contract one axis at a time: (K1,K2,..) -> (n1,K2,..) -> ...
        for d, (b, x) in enumerate(zip(self.bases, coords)):
            phi = b.evaluate(np.ravel(x))  # (n_d, K_d)
            out = np.moveaxis(np.tensordot(phi, out, axes=([1], [d])), 0, d)
        return out

    def evaluate(self, grid: Grid, multiplier: np.ndarray | None = None) -> ComplexField:
        if grid.dim != self.dim:
            raise ValueError("grid dimension differs from expansion dimension")
        return ComplexField(grid, self.synthesize([grid.axis(d) for d in range(grid.dim)], multiplier))


def _solve_gram(G: np.ndarray, b: np.ndarray, axis: int) -> np.ndarray:
    moved = np.moveaxis(b, axis, 0)
    sol = np.linalg.solve(G, moved.reshape(G.shape[0], -1)).reshape(moved.shape)
    return np.moveaxis(sol, 0, axis)


def _project(bases, g, n_nodes):
    """b-tensor ``(phi_{m...}, g)`` by tensor Fejer quadrature with ``n_nodes`` per axis."""
    nodes = [_nodes_on(b, n_nodes) for b in bases]
    if isinstance(g, (list, tuple)):
        # separable: per-axis 1D projections, combined by outer product
        b = np.ones((), dtype=complex)
        for (x, w), bas, gd in zip(nodes, bases, g):
            bd = (np.conj(bas.evaluate(x)) * (w * np.asarray(gd(x), dtype=complex))[:, None]).sum(axis=0)
            b = np.multiply.outer(b, bd)
        return b, nodes
    mesh = np.meshgrid(*(x for x, _ in nodes), indexing="ij", sparse=True)
    vals = np.broadcast_to(np.asarray(g(*mesh), dtype=complex), tuple(len(x) for x, _ in nodes))
    out = vals
    for d, ((x, w), bas) in enumerate(zip(nodes, bases)):
        phiw = np.conj(bas.evaluate(x)) * w[:, None]  # (n, K)
        out = np.moveaxis(np.tensordot(phiw, out, axes=([0], [d])), 0, d)
    return out, nodes


def expand_function(
    bases: EigenBasis | Sequence[EigenBasis],
    g: Callable | Sequence[Callable],
    *,
    tol: float = 1e-10,
    n_start: int = 128,
    n_max: int = 1 << 14,
) -> ModalExpansion:
    """Coefficients ``c`` with ``g = sum c prod phi`` in the Gram (least-squares) sense.

    ``g`` is either a callable of ``dim`` coordinate arrays, or a sequence of
    per-axis callables for a separable product. The right-hand side
    ``b_m = (phi_m, g)`` uses Fejer quadrature, doubling the node count until
    ``b`` changes by less than ``tol`` (relative, max-norm). A Gram condition
    number above 1e12 emits :class:`IllConditionedExpansionWarning` and sets
    ``ill_conditioned`` on the result.
    """
    if isinstance(bases, EigenBasis):
        bases = (bases,)
    bases = tuple(bases)
    if isinstance(g, (list, tuple)) and len(g) != len(bases):
        raise ValueError("need one factor per axis for a separable source")
    n = n_start
    b_prev, _ = _project(bases, g, n)
    while True:
        n *= 2
        b, nodes = _project(bases, g, n)
        change = np.max(np.abs(b - b_prev)) / max(np.max(np.abs(b)), 1e-300)
        if change < tol or n >= n_max:
            break
        b_prev = b
    cond = 1.0
    c = b
    for d, bas in enumerate(bases):
        G = gram_matrix(bas)
        cond = max(cond, float(np.linalg.cond(G)))
        c = _solve_gram(G, c, d)
    exp = ModalExpansion(bases, c, condition=cond, ill_conditioned=cond > 1e12, quad_nodes=n)
    if exp.ill_conditioned:
        warnings.warn(f"Gram condition number {cond:.3g} exceeds 1e12", IllConditionedExpansionWarning, stacklevel=2)
    # reconstruction at the Fejer nodes (on a coarser node set in 3D to bound memory)
    sub = [x if len(bases) < 3 else x[:: max(1, len(x) // 64)] for x, _ in nodes]
    recon = exp.synthesize(sub)
    if isinstance(g, (list, tuple)):
        target = np.ones((), dtype=complex)
        for x, gd in zip(sub, g):
            target = np.multiply.outer(target, np.asarray(gd(x), dtype=complex))
    else:
        target = np.asarray(g(*np.meshgrid(*sub, indexing="ij", sparse=True)), dtype=complex)
    exp.reconstruction_error = float(np.max(np.abs(recon - target)) / max(np.max(np.abs(target)), 1e-300))
    return exp


# ---------------------------------------------------------------------------
# exact fields


def exact_paraxial(exp: ModalExpansion, kappa: float, t: float, grid: Grid) -> ComplexField:
    """``u(t) = sum c exp(-i Lambda t / kappa^2) prod phi`` for ``beta = 1``."""
    if t < 0:
        raise ValueError("t must be non-negative")
    return exp.evaluate(grid, np.exp(-1j * exp.eigen_sums() * t / kappa**2))


def modal_symbol(exp: ModalExpansion, kappa: float) -> np.ndarray:
    """``1 - Lambda/kappa^2`` per mode; raises on resonance."""
    sym = 1.0 - exp.eigen_sums() / kappa**2
    bad = np.abs(sym) < 1e-8
    if bad.any():
        idx = tuple(int(i) + 1 for i in np.argwhere(bad)[0])
        raise ResonanceError(idx, complex(sym[tuple(i - 1 for i in idx)]))
    return sym


def exact_v1_v2(exp: ModalExpansion, kappa: float, grid: Grid) -> tuple[ComplexField, ComplexField]:
    """``A^{-1/2} g`` (principal root) and ``A^{-1} g`` from the modal expansion of g."""
    sym = modal_symbol(exp, kappa)
    return exp.evaluate(grid, 1.0 / np.sqrt(sym)), exp.evaluate(grid, 1.0 / sym)


def asymptotic_decay(kappa: float, edge_lengths) -> tuple[float, float]:
    """Late-time rates ``(a_d, b_d)`` in ``u ~ t^{-d} exp(-(a_d + i b_d) t)``."""
    Ls = np.atleast_1d(np.asarray(edge_lengths, dtype=float))
    if kappa <= 0 or np.any(Ls <= 0):
        raise ValueError("kappa and edge lengths must be positive")
    a = 4 * math.pi**2 / kappa**3 * float(np.sum(1.0 / Ls**3))
    b = math.pi**2 / kappa**2 * float(np.sum(1.0 / Ls**2))
    return a, b
