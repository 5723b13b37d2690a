"""
Numerical core: warping, differential operators, energies, iPALM and the
multilevel schedule.
"""

from .energy import EnergyBreakdown, KeyFrameSet, SplineState, total_energy
from .multilevel import HermiteData, solve_multilevel
from .optimize import SolverDivergenceError, ipalm_solve
from .warp import warp, warp_adjoint

__all__ = [
    "EnergyBreakdown",
    "HermiteData",
    "KeyFrameSet",
    "SolverDivergenceError",
    "SplineState",
    "ipalm_solve",
    "solve_multilevel",
    "total_energy",
    "warp",
    "warp_adjoint",
]
