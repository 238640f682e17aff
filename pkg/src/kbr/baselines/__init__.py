"""Reference methods: finite differences, smoothing splines, exact and
approximate Riemann solvers and a MUSCL scheme."""

from .euler import (GAMMA, SOD_LEFT, SOD_RIGHT, EulerPrimitive, cons_to_prim, euler_flux,
                    prim_to_cons, sod_exact, star_state)
from .fd import FDStencil, fd_derivatives, fd_weights
from .muscl import euler_max_speed, minmod, muscl_tvd_step
from .roe import roe_dissipation, roe_flux, roe_flux_cons
from .spline import SmoothingSpline, smoothing_spline, spline_budget

__all__ = [
    "GAMMA", "SOD_LEFT", "SOD_RIGHT", "EulerPrimitive", "cons_to_prim", "euler_flux",
    "prim_to_cons", "sod_exact", "star_state", "FDStencil", "fd_derivatives", "fd_weights",
    "euler_max_speed", "minmod", "muscl_tvd_step", "roe_dissipation", "roe_flux",
    "roe_flux_cons", "SmoothingSpline", "smoothing_spline", "spline_budget",
]
