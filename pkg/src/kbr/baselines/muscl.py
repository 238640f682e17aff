"""MUSCL reconstruction with a minmod limiter and forward-Euler update."""

from __future__ import annotations

import numpy as np

from ..errors import Unstable
from ..grid import Grid1D
from .euler import GAMMA, cons_to_prim
from .roe import roe_flux_cons

__all__ = ["minmod", "muscl_tvd_step", "euler_max_speed"]


def minmod(a, b):
    return np.where(a * b > 0, np.sign(a) * np.minimum(np.abs(a), np.abs(b)), 0.0)


def euler_max_speed(U, gamma: float = GAMMA) -> float:
    rho, u, p = cons_to_prim(U, gamma)
    return float(np.max(np.abs(u) + np.sqrt(gamma * p / rho)))


def muscl_tvd_step(U, grid: Grid1D, dt: float, *, flux=roe_flux_cons, max_speed=euler_max_speed):
    """One forward-Euler MUSCL step with zero-gradient (outflow) boundaries.

    ``U`` has shape (ncomp, N) or (N,).  ``flux(UL, UR)`` maps reconstructed
    interface states (same leading shape, M columns) to interface fluxes and
    ``max_speed(U)`` bounds the characteristic speeds for the CFL check.
    """
    U = np.asarray(U, dtype=float)
    scalar = U.ndim == 1
    if scalar:
        U = U[None, :]
    x = grid.nodes
    vol = grid.cell_widths
    speed = max_speed(U[0] if scalar else U)
    if dt * speed > np.min(vol):
        raise Unstable(f"CFL violated: dt * speed = {dt * speed:.3g} exceeds the smallest cell")
    # limited slopes; ghost cells copy the boundary state so end slopes vanish
    dU = np.diff(U, axis=1) / np.diff(x)
    slope = np.zeros_like(U)
    slope[:, 1:-1] = minmod(dU[:, :-1], dU[:, 1:])
    xf = grid.interfaces
    UL = U[:, :-1] + slope[:, :-1] * (xf - x[:-1])
    UR = U[:, 1:] + slope[:, 1:] * (xf - x[1:])
    # boundary faces: the ghost equals the boundary node
    UL = np.concatenate([U[:, :1], UL, U[:, -1:]], axis=1)
    UR = np.concatenate([U[:, :1], UR, U[:, -1:]], axis=1)
    if scalar:
        F = np.asarray(flux(UL[0], UR[0]))[None, :]
    else:
        F = flux(UL, UR)
    out = U - dt / vol * (F[:, 1:] - F[:, :-1])
    return out[0] if scalar else out
