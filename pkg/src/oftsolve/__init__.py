"""Inverse square-root (OFT) solver for the Helmholtz equation.

The operator ``A = beta + Laplacian/kappa^2`` with non-reflecting faces is
inverted as ``A^{-1} = f(A)^2`` with ``f(x) = x^{-1/2}``. Each application of
``f(A)`` marches a paraxial pseudo-time problem with ADI and accumulates the
snapshots against exact product-integration weights.
"""

import os as _os

# the TBB layer shipped with some numba wheels is too old; OpenMP is deterministic enough
if "NUMBA_THREADING_LAYER" not in _os.environ:
    import numba as _numba

    _numba.config.THREADING_LAYER = "omp"

from .grid import ComplexField, Grid, RefractionField  # noqa: E402
from .schedule import build_schedule  # noqa: E402

__version__ = "0.1.0"

__all__ = ["Grid", "ComplexField", "RefractionField", "build_schedule", "__version__"]
