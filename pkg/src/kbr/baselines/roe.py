"""Roe approximate Riemann flux for the 1D Euler equations."""

from __future__ import annotations

import numpy as np

from ..errors import NonPhysicalState
from .euler import GAMMA, EulerPrimitive, cons_to_prim, euler_flux, prim_to_cons

__all__ = ["roe_flux", "roe_flux_cons", "roe_dissipation", "ENTROPY_FIX"]

ENTROPY_FIX = 0.1


def roe_dissipation(UL, UR, gamma: float = GAMMA, fix: float = ENTROPY_FIX) -> np.ndarray:
    """Upwind term ``1/2 sum_k |lam_k| alpha_k r_k`` of the Roe flux.

    ``UL`` and ``UR`` are conserved states of shape (3, M).  Harten's entropy
    fix smooths ``|lam|`` below ``delta = fix * (|u| + a)`` (Roe averages).
    """
    rL, uL, pL = cons_to_prim(UL, gamma)
    rR, uR, pR = cons_to_prim(UR, gamma)
    if np.any(rL <= 0) or np.any(rR <= 0) or np.any(pL <= 0) or np.any(pR <= 0):
        raise NonPhysicalState("non-positive density or pressure in Roe flux input")
    HL = (UL[2] + pL) / rL
    HR = (UR[2] + pR) / rR
    sL, sR = np.sqrt(rL), np.sqrt(rR)
    rho = sL * sR
    u = (sL * uL + sR * uR) / (sL + sR)
    H = (sL * HL + sR * HR) / (sL + sR)
    a2 = (gamma - 1.0) * (H - 0.5 * u * u)
    if np.any(a2 <= 0):
        raise NonPhysicalState("Roe-averaged sound speed is not real")
    a = np.sqrt(a2)
    dr, du, dp = rR - rL, uR - uL, pR - pL
    alpha = np.stack([(dp - rho * a * du) / (2.0 * a2),
                      dr - dp / a2,
                      (dp + rho * a * du) / (2.0 * a2)])
    lam = np.abs(np.stack([u - a, u, u + a]))
    if fix > 0:
        delta = fix * (np.abs(u) + a)
        small = lam < delta
        lam = np.where(small, (lam * lam + delta * delta) / (2.0 * delta), lam)
    one = np.ones_like(u)
    r = np.stack([
        np.stack([one, u - a, H - u * a]),
        np.stack([one, u, 0.5 * u * u]),
        np.stack([one, u + a, H + u * a]),
    ])  # (wave, component, M)
    return 0.5 * np.einsum("km,kcm->cm", lam * alpha, r)


def roe_flux_cons(UL, UR, gamma: float = GAMMA, fix: float = ENTROPY_FIX) -> np.ndarray:
    """Roe interface flux for conserved states of shape (3, M)."""
    UL = np.asarray(UL, dtype=float)
    UR = np.asarray(UR, dtype=float)
    central = 0.5 * (euler_flux(UL, gamma) + euler_flux(UR, gamma))
    return central - roe_dissipation(UL, UR, gamma, fix)


def roe_flux(left: EulerPrimitive, right: EulerPrimitive, fix: float = ENTROPY_FIX) -> np.ndarray:
    """Roe flux between two primitive states (scalars or arrays)."""
    UL = prim_to_cons(left.rho, left.u, left.p, left.gamma)
    UR = prim_to_cons(right.rho, right.u, right.p, right.gamma)
    shape = np.broadcast(UL, UR).shape
    F = roe_flux_cons(np.broadcast_to(UL, shape).reshape(3, -1),
                      np.broadcast_to(UR, shape).reshape(3, -1), left.gamma, fix)
    return F.reshape(shape)
