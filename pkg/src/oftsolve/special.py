"""Fresnel integrals in the unnormalized convention.

    C(x) = int_0^x cos(t^2) dt,    S(x) = int_0^x sin(t^2) dt

Note the missing pi/2 factor: most libraries (scipy.special.fresnel included)
use cos(pi t^2 / 2). Both tend to sqrt(pi/8) as x -> +inf.

Small arguments use the Maclaurin series. Large arguments use

    C(x) + i S(x) = sqrt(pi)/2 e^{i pi/4} (1 - erfc(e^{-i pi/4} x)),

with erfc evaluated by its continued fraction (modified Lentz), which
converges quickly once |x| is past the crossover.
"""

from __future__ import annotations

from typing import NamedTuple

import numpy as np

__all__ = ["FresnelPair", "fresnel", "fresnel_series", "fresnel_cf", "CROSSOVER"]

CROSSOVER = 2.0
_SQRT_PI_8 = np.sqrt(np.pi / 8.0)
_EIPI4 = np.exp(0.25j * np.pi)
_TINY = 1e-300


class FresnelPair(NamedTuple):
    c: float
    s: float


def fresnel_series(x: float) -> complex:
    """Maclaurin series for ``C(x) + i S(x)``; accurate to ~1e-15 for x <= 2.5."""
    x2 = x * x
    # sum_k (i x^2)^k / k! * x / (2k+1)
    term = complex(x)
    total = term
    k = 0
    while True:
        k += 1
        term *= 1j * x2 / k
        contrib = term / (2 * k + 1)
        total += contrib
        if abs(contrib) < 1e-17 * max(abs(total), 1e-300) and k > 2:
            break
        if k > 500:
            raise RuntimeError("Fresnel series failed to converge")
    return total


def fresnel_cf(x: float) -> complex:
    """Continued-fraction branch for ``C(x) + i S(x)``, intended for x >= ~1.5."""
    z = x / _EIPI4  # e^{-i pi/4} x, so z^2 = -i x^2
    z2 = -1j * x * x
    # sqrt(pi) e^{z^2} erfc(z) = 2z / (2z^2+1 - 1*2/(2z^2+5 - 3*4/(2z^2+9 - ...)))
    b = 2 * z2 + 1
    c = 1.0 / _TINY
    d = 1.0 / b
    h = d
    n = 1
    while True:
        a = -(2 * n - 1) * (2 * n)
        b = b + 4
        d = a * d + b
        if abs(d) < _TINY:
            d = _TINY
        c = b + a / c
        if abs(c) < _TINY:
            c = _TINY
        d = 1.0 / d
        delta = c * d
        h *= delta
        if abs(delta - 1.0) < 1e-16:
            break
        n += 1
        if n > 10000:
            raise RuntimeError("Fresnel continued fraction failed to converge")
    # e^{-z^2} = e^{i x^2}
    erfc_z = 2 * z * h * np.exp(1j * x * x) / np.sqrt(np.pi)
    return 0.5 * np.sqrt(np.pi) * _EIPI4 * (1.0 - erfc_z)


def _fresnel_scalar(x: float) -> complex:
    if np.isnan(x):
        raise ValueError("fresnel: NaN argument")
    ax = abs(x)
    if np.isinf(ax):
        val = complex(_SQRT_PI_8, _SQRT_PI_8)
    elif ax <= CROSSOVER:
        val = fresnel_series(ax)
    else:
        val = fresnel_cf(ax)
    return -val if x < 0 else val


def fresnel(x):
    """Fresnel integrals ``(C(x), S(x))`` without the pi/2 normalization.

    Accepts a scalar or an array; odd in ``x`` by construction.
    """
    if np.ndim(x) == 0:
        val = _fresnel_scalar(float(x))
        return FresnelPair(val.real, val.imag)
    arr = np.asarray(x, dtype=float)
    out = np.array([_fresnel_scalar(v) for v in arr.ravel()]).reshape(arr.shape)
    return FresnelPair(out.real, out.imag)
