"""
Reference implementations used to validate the optimized numerical paths.

Nothing in here imports from ``metaspline.algorithms``; the oracles only
share the configuration type.
"""

from .oracle import (
    adjoint_check,
    brute_force_prox_pixel,
    dense_natural_spline,
    fd_gradient,
    naive_total_energy,
)

__all__ = [
    "adjoint_check",
    "brute_force_prox_pixel",
    "dense_natural_spline",
    "fd_gradient",
    "naive_total_energy",
]
