"""Ideal-gas Euler helpers and the exact Riemann solution (Sod problem)."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import InvalidInput, NonPhysicalState, SolverFailed

GAMMA = 1.4

__all__ = [
    "GAMMA",
    "EulerPrimitive",
    "SOD_LEFT",
    "SOD_RIGHT",
    "prim_to_cons",
    "cons_to_prim",
    "euler_flux",
    "sound_speed",
    "star_state",
    "sod_exact",
]


@dataclass(frozen=True)
class EulerPrimitive:
    """Primitive state; fields may be scalars or equal-length arrays."""

    rho: np.ndarray
    u: np.ndarray
    p: np.ndarray
    gamma: float = GAMMA

    def __post_init__(self):
        for name in ("rho", "u", "p"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=float))
        if np.any(self.rho <= 0) or np.any(self.p <= 0):
            raise NonPhysicalState("density and pressure must be positive")

    @property
    def a(self):
        return np.sqrt(self.gamma * self.p / self.rho)

    def conserved(self) -> np.ndarray:
        return prim_to_cons(self.rho, self.u, self.p, self.gamma)


SOD_LEFT = EulerPrimitive(1.0, 0.0, 1.0)
SOD_RIGHT = EulerPrimitive(0.125, 0.0, 0.1)


def prim_to_cons(rho, u, p, gamma=GAMMA) -> np.ndarray:
    rho, u, p = (np.asarray(v, dtype=float) for v in (rho, u, p))
    return np.stack([rho, rho * u, p / (gamma - 1.0) + 0.5 * rho * u * u])


def cons_to_prim(U, gamma=GAMMA):
    """``(rho, u, p)`` from conserved rows ``[rho, rho u, rho E]``."""
    U = np.asarray(U, dtype=float)
    rho = U[0]
    u = U[1] / rho
    p = (gamma - 1.0) * (U[2] - 0.5 * rho * u * u)
    return rho, u, p


def euler_flux(U, gamma=GAMMA) -> np.ndarray:
    rho, u, p = cons_to_prim(U, gamma)
    return np.stack([rho * u, rho * u * u + p, u * (U[2] + p)])


def sound_speed(rho, p, gamma=GAMMA):
    return np.sqrt(gamma * np.asarray(p) / np.asarray(rho))


def _pressure_fn(p, s: EulerPrimitive):
    """Velocity jump across the wave facing state ``s`` and its derivative."""
    g = s.gamma
    if p > s.p:
        A = 2.0 / ((g + 1.0) * s.rho)
        B = (g - 1.0) / (g + 1.0) * s.p
        q = np.sqrt(A / (p + B))
        return (p - s.p) * q, q * (1.0 - 0.5 * (p - s.p) / (p + B))
    a = s.a
    r = (p / s.p) ** ((g - 1.0) / (2.0 * g))
    return 2.0 * a / (g - 1.0) * (r - 1.0), (p / s.p) ** (-(g + 1.0) / (2.0 * g)) / (s.rho * a)


def star_state(left: EulerPrimitive, right: EulerPrimitive, *, tol: float = 1e-14,
               max_iter: int = 100) -> tuple[float, float]:
    """Star-region pressure and velocity by Newton iteration on the pressure function."""
    g = left.gamma
    du = float(right.u - left.u)
    aL, aR = float(left.a), float(right.a)
    if 2.0 / (g - 1.0) * (aL + aR) <= du:
        raise SolverFailed("the data generate a vacuum")
    # two-rarefaction guess, which is exact when both waves are rarefactions
    z = (g - 1.0) / (2.0 * g)
    p = ((aL + aR - 0.5 * (g - 1.0) * du)
         / (aL / float(left.p) ** z + aR / float(right.p) ** z)) ** (1.0 / z)
    p = max(p, 1e-12)
    for _ in range(max_iter):
        fL, dL = _pressure_fn(p, left)
        fR, dR = _pressure_fn(p, right)
        f = fL + fR + du
        p_new = p - f / (dL + dR)
        if p_new <= 0:
            p_new = 0.5 * p
        change = abs(p_new - p) / (0.5 * (p_new + p))
        p = p_new
        if change < tol:
            fL, _ = _pressure_fn(p, left)
            fR, _ = _pressure_fn(p, right)
            return float(p), float(0.5 * (left.u + right.u) + 0.5 * (fR - fL))
    raise SolverFailed("Newton iteration for the star pressure did not converge")


def _sample(xi, left, right, p_s, u_s):
    """Exact solution at similarity coordinates ``xi = (x - x0) / t``."""
    g = left.gamma
    gm, gp = g - 1.0, g + 1.0
    rho = np.empty_like(xi)
    u = np.empty_like(xi)
    p = np.empty_like(xi)
    for side, s, sign in (("L", left, -1.0), ("R", right, 1.0)):
        on = xi < u_s if side == "L" else xi >= u_s
        a = float(s.a)
        rs, us, ps = float(s.rho), float(s.u), float(s.p)
        if p_s > ps:  # shock
            rho_star = rs * (p_s / ps + gm / gp) / (gm / gp * p_s / ps + 1.0)
            S = us + sign * a * np.sqrt(gp / (2 * g) * p_s / ps + gm / (2 * g))
            outside = on & ((xi < S) if side == "L" else (xi > S))
            inside = on & ~outside
            rho[inside], u[inside], p[inside] = rho_star, u_s, p_s
        else:  # rarefaction
            rho_star = rs * (p_s / ps) ** (1.0 / g)
            a_star = a * (p_s / ps) ** (gm / (2 * g))
            head = us + sign * a
            tail = u_s + sign * a_star
            if side == "L":
                outside = on & (xi < head)
                star = on & (xi > tail)
            else:
                outside = on & (xi > head)
                star = on & (xi < tail)
            fan = on & ~outside & ~star
            rho[star], u[star], p[star] = rho_star, u_s, p_s
            uf = 2.0 / gp * (-sign * a + gm / 2.0 * us + xi[fan])
            c = 2.0 / gp * (a - sign * gm / 2.0 * (us - xi[fan]))
            rho[fan] = rs * (c / a) ** (2.0 / gm)
            u[fan] = uf
            p[fan] = ps * (c / a) ** (2.0 * g / gm)
        rho[outside], u[outside], p[outside] = rs, us, ps
    return rho, u, p


def sod_exact(xs, t: float, left: EulerPrimitive = SOD_LEFT,
              right: EulerPrimitive = SOD_RIGHT, x0: float = 0.5) -> EulerPrimitive:
    """Exact Riemann solution sampled at positions ``xs`` and time ``t > 0``."""
    if not t > 0:
        raise InvalidInput("t must be positive")
    if left.gamma != right.gamma:
        raise InvalidInput("left and right states need the same gamma")
    xi = (np.atleast_1d(np.asarray(xs, dtype=float)) - x0) / t
    p_s, u_s = star_state(left, right)
    rho, u, p = _sample(xi, left, right, p_s, u_s)
    return EulerPrimitive(rho, u, p, left.gamma)
