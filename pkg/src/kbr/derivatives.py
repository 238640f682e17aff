"""Gradient, Laplacian and Hessian estimates from a trained kernel model.

Two families are provided:

* the explicit scheme combines the uncorrected and moment-corrected
  predictions at the query point in closed form;
* the implicit scheme shifts the kernel center by a small ``eps`` in each
  direction and solves the small linear system that a local quadratic
  ``a + b.x + x.C.x`` must satisfy on every shifted weight set.

All arithmetic happens in the model's normalized coordinates with offsets
measured from the query point, so the linear coefficient of the local fit is
the gradient itself.  Results are mapped back to physical units at the end.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import GradientDegenerate, IllConditioned, InvalidInput, LaplacianDegenerate
from .kernel import KernelModel, TOL_THETA, _require_converged, _tilted_weights, as_points

TOL_DENOM = 1e-10
EPS_FACTOR = 0.025
COND_MAX = 1e12
EPS_RETRIES = 3

__all__ = [
    "QuadraticFit",
    "DerivativeEstimate",
    "DerivativeField",
    "ImplicitConfig",
    "explicit_derivatives_1d",
    "explicit_derivatives_known_field",
    "implicit_derivatives_1d",
    "implicit_derivatives_2d",
    "explicit_field",
    "implicit_field",
]


@dataclass(frozen=True)
class QuadraticFit:
    """Local quadratic ``a + b.x + x.C.x`` (``C`` symmetric)."""

    a: float
    b: np.ndarray
    C: np.ndarray

    def __post_init__(self):
        C = np.atleast_2d(np.asarray(self.C, dtype=float))
        if not np.allclose(C, C.T, rtol=0, atol=1e-12):
            raise InvalidInput("C must be symmetric")
        object.__setattr__(self, "C", C)
        object.__setattr__(self, "b", np.atleast_1d(np.asarray(self.b, dtype=float)))

    def value(self, x) -> float:
        x = np.atleast_1d(np.asarray(x, dtype=float))
        return float(self.a + self.b @ x + x @ self.C @ x)

    def gradient(self, x) -> np.ndarray:
        x = np.atleast_1d(np.asarray(x, dtype=float))
        return self.b + 2.0 * self.C @ x

    @property
    def hessian(self) -> np.ndarray:
        return 2.0 * self.C

    @property
    def laplacian(self) -> float:
        return float(np.trace(self.hessian))


@dataclass(frozen=True)
class DerivativeEstimate:
    """Derivatives at one query point, in physical units."""

    grad: np.ndarray
    lap: float
    scheme: str
    hessian: np.ndarray | None = None
    cond: float | None = None
    denom: float | None = None

    def __post_init__(self):
        vals = [np.asarray(self.grad), np.asarray(self.lap)]
        if self.hessian is not None:
            vals.append(np.asarray(self.hessian))
        if not all(np.all(np.isfinite(v)) for v in vals):
            raise InvalidInput("derivative estimate is not finite")


@dataclass
class DerivativeField:
    """Vectorized derivatives over many query points (physical units).

    ``grad`` has shape (M,) in 1D and (M, D) otherwise.  ``fallback`` marks
    rows whose explicit estimate was degenerate and was replaced by the
    implicit one.
    """

    grad: np.ndarray
    lap: np.ndarray
    scheme: str
    hessian: np.ndarray | None = None
    cond: np.ndarray | None = None
    denom: np.ndarray | None = None
    fallback: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=bool))

    def __getitem__(self, i) -> DerivativeEstimate:
        return DerivativeEstimate(
            grad=np.atleast_1d(self.grad[i]), lap=float(self.lap[i]), scheme=self.scheme,
            hessian=None if self.hessian is None else self.hessian[i],
            cond=None if self.cond is None else float(self.cond[i]),
            denom=None if self.denom is None else float(self.denom[i]))


@dataclass(frozen=True)
class ImplicitConfig:
    """Perturbation size for the implicit scheme, in normalized units.

    ``None`` means ``0.025 * sqrt(theta)`` for the model at hand.
    """

    epsilon: float | None = None

    def resolve(self, theta: float) -> float:
        eps = EPS_FACTOR * np.sqrt(theta) if self.epsilon is None else float(self.epsilon)
        if not 0 < eps < np.sqrt(theta):
            raise InvalidInput(f"epsilon must lie in (0, sqrt(theta)); got {eps}")
        return eps


# ---------------------------------------------------------------------------
# explicit scheme


def _frame(model, x):
    frame = model.frame(x)
    _require_converged(frame)
    return frame


def _explicit_core(model: KernelModel, frame, known=None, verbatim=False):
    """Normalized gradient, Laplacian and |x_hat - x| for every frame row.

    ``c`` (half the second derivative) comes from ``phi1 - phi(x) = c Theta``
    where ``phi(x)`` is either known or the exact second-order prediction;
    the gradient then follows from the uncorrected-minus-corrected relation.
    With ``verbatim`` the Laplacian is taken as ``2 (phi0 - phi1) / Theta``.
    """
    geom = model.geometry
    d = frame.d[:, :, 0]
    w, w0 = frame.w, frame.w0
    phi = np.where(frame.mask, model.values_n[frame.idx], 0.0)
    # subtract a local reference so the differences below do not cancel
    ref = phi[np.arange(len(frame)), np.argmin(np.where(frame.mask, np.abs(d), np.inf), axis=1)]
    dphi = phi - ref[:, None]
    phi1 = np.einsum("mk,mk->m", w, dphi)
    phi0 = np.einsum("mk,mk->m", w0, dphi)
    theta = np.einsum("mk,mk->m", w, d * d)
    theta0 = np.einsum("mk,mk->m", w0, d * d)
    denom = np.einsum("mk,mk->m", w0, d)
    scale = np.einsum("mk,mk->m", w, (frame.centers[:, :1] + d) ** 2)
    if verbatim:
        c = (phi0 - phi1) / np.where(theta == 0, 1.0, theta)
    elif known is None:
        cidx, wk, _ = geom.correction_weights(frame)
        c = -np.einsum("mk,mk->m", wk, model.curvature[cidx])
    else:
        c = (phi1 - (known - ref)) / np.where(theta == 0, 1.0, theta)
    lap_bad = np.abs(theta) < TOL_THETA * np.maximum(scale, 1.0)
    grad_bad = np.abs(denom) < TOL_DENOM
    with np.errstate(divide="ignore", invalid="ignore"):
        grad = (phi0 - phi1 - c * (theta0 - theta)) / denom
    return grad, 2.0 * c, np.abs(denom), grad_bad, lap_bad


def _to_physical_1d(model, grad_n, lap_n):
    s = model.norm_field
    return grad_n * s / model.scale, lap_n * s / model.scale ** 2


def explicit_field(model: KernelModel, x, *, fallback: bool = True, known=None,
                   cfg: ImplicitConfig | None = None, verbatim: bool = False) -> DerivativeField:
    """Explicit-scheme derivatives at many 1D points.

    Rows where ``|x_hat - x|`` is below the denominator tolerance (for
    instance symmetric nodes of a uniform grid) are recomputed with the
    implicit scheme when ``fallback`` is true, otherwise
    :class:`GradientDegenerate` is raised.
    """
    if model.dim != 1:
        raise InvalidInput("the explicit scheme is defined for 1D models")
    frame = _frame(model, x)
    if known is not None:
        known = np.atleast_1d(np.asarray(known, dtype=float)) / model.norm_field
    grad, lap, denom, grad_bad, lap_bad = _explicit_core(model, frame, known, verbatim)
    if np.any(lap_bad):
        raise LaplacianDegenerate("second-moment error vanishes",
                                  index=np.flatnonzero(lap_bad))
    if np.any(grad_bad):
        bad = np.flatnonzero(grad_bad)
        if not fallback:
            raise GradientDegenerate("uncorrected mean coincides with the query point",
                                     index=bad)
        sub = _implicit_core_1d(model, frame, bad, cfg or ImplicitConfig())
        grad[bad] = sub[0]
        lap[bad] = sub[1]
    g, l = _to_physical_1d(model, grad, lap)
    return DerivativeField(grad=g, lap=l, scheme="explicit", denom=denom * model.scale,
                           fallback=grad_bad)


def explicit_derivatives_1d(model: KernelModel, x, *, verbatim: bool = False) -> DerivativeEstimate:
    """Explicit-scheme gradient and Laplacian at a single 1D point.

    ``verbatim=True`` uses ``2 (phi0 - phi1) / Theta`` for the Laplacian,
    which is only consistent when the uncorrected mean sits at ``x``; it is
    kept for comparison.
    """
    out = explicit_field(model, [float(np.asarray(x).reshape(-1)[0])], fallback=False,
                         verbatim=verbatim)
    return out[0]


def explicit_derivatives_known_field(model: KernelModel, x, phi_x) -> DerivativeEstimate:
    """Explicit scheme using a known field value ``phi(x)`` at the query point."""
    out = explicit_field(model, [float(np.asarray(x).reshape(-1)[0])], fallback=False,
                         known=[phi_x])
    return out[0]


# ---------------------------------------------------------------------------
# implicit scheme


def _poly_columns(s):
    """Monomials of the local quadratic for offsets ``s`` of shape (..., D)."""
    D = s.shape[-1]
    cols = [np.ones(s.shape[:-1])]
    cols += [s[..., a] for a in range(D)]
    for a in range(D):
        for b in range(a, D):
            cols.append(s[..., a] * s[..., b])
    return np.stack(cols, axis=-1)


def _shift_sets(dim, lam, eps):
    """Kernel-center shifts (relative to the query point) for each row."""
    base = [lam]
    e = np.eye(dim)
    for a in range(dim):
        base.append(lam - eps * e[a])
        base.append(lam + eps * e[a])
    if dim == 2:
        # axis shifts alone leave the mixed term unseen on symmetric stencils
        base.append(lam + eps * (e[0] + e[1]))
        base.append(np.zeros_like(lam))
    return base


def _implicit_system(model, frame, rows, eps):
    geom = model.geometry
    sq = geom.sqrt_theta
    d = frame.d[rows]
    mask = frame.mask[rows]
    lam = frame.lam[rows]
    phi = np.where(mask, model.values_n[frame.idx[rows]], 0.0)
    s = d / sq
    mon = _poly_columns(s)  # (m, k, p)
    A_rows, B_rows = [], []
    for shift in _shift_sets(geom.dim, lam, eps):
        w = _tilted_weights(d, mask, shift, geom.theta)
        A_rows.append(np.einsum("mk,mkp->mp", w, mon))
        B_rows.append(np.einsum("mk,mk->m", w, phi))
    A = np.stack(A_rows, axis=1)
    B = np.stack(B_rows, axis=1)
    return A, B


def _solve_systems(A, B):
    sv = np.linalg.svd(A, compute_uv=False)
    with np.errstate(divide="ignore"):
        cond = np.where(sv[:, -1] > 0, sv[:, 0] / sv[:, -1], np.inf)
    if A.shape[1] == A.shape[2]:
        # rows above the limit are retried or rejected by the caller
        ok = cond <= COND_MAX
        X = np.zeros(A.shape[:2])
        if np.any(ok):
            X[ok] = np.linalg.solve(A[ok], B[ok][..., None])[..., 0]
    else:
        X = np.einsum("mpr,mr->mp", np.linalg.pinv(A), B)
    return X, cond


def _implicit_solve(model, frame, rows, cfg, strict=True):
    eps = cfg.resolve(model.geometry.theta)
    rows = np.asarray(rows)
    X = np.zeros((rows.size, 1 + model.dim + model.dim * (model.dim + 1) // 2))
    cond = np.full(rows.size, np.inf)
    todo = np.arange(rows.size)
    for attempt in range(EPS_RETRIES + 1):
        A, B = _implicit_system(model, frame, rows[todo], eps)
        Xt, ct = _solve_systems(A, B)
        X[todo], cond[todo] = Xt, ct
        bad = ~(ct <= COND_MAX)
        todo = todo[bad]
        if todo.size == 0:
            break
        eps = 2.0 * eps
        if eps >= model.geometry.sqrt_theta:
            break
    if todo.size and not strict:
        X[todo] = np.nan
    elif todo.size:
        raise IllConditioned(f"implicit system ill-conditioned at {todo.size} point(s)",
                             index=rows[todo])
    return X, cond


def _implicit_core_1d(model, frame, rows, cfg, strict=True):
    X, cond = _implicit_solve(model, frame, rows, cfg, strict)
    sq = model.geometry.sqrt_theta
    return X[:, 1] / sq, 2.0 * X[:, 2] / sq ** 2, cond


def implicit_field(model: KernelModel, x, cfg: ImplicitConfig | None = None, *,
                   strict: bool = True) -> DerivativeField:
    """Implicit-scheme derivatives at many points (1D or 2D).

    With ``strict=False`` rows whose system stays ill-conditioned after the
    epsilon retries are returned as NaN instead of raising.
    """
    cfg = cfg or ImplicitConfig()
    frame = _frame(model, x)
    rows = np.arange(len(frame))
    if model.dim == 1:
        g, l, cond = _implicit_core_1d(model, frame, rows, cfg, strict)
        g, l = _to_physical_1d(model, g, l)
        return DerivativeField(grad=g, lap=l, scheme="implicit", cond=cond,
                               fallback=np.zeros(len(rows), dtype=bool))
    if model.dim != 2:
        raise InvalidInput("the implicit scheme supports 1D and 2D models")
    X, cond = _implicit_solve(model, frame, rows, cfg, strict)
    sq = model.geometry.sqrt_theta
    s = model.norm_field
    grad = X[:, 1:3] / sq * s / model.scale
    c11, c12, c22 = X[:, 3], X[:, 4], X[:, 5]
    hess = np.empty((len(rows), 2, 2))
    hess[:, 0, 0] = 2.0 * c11
    hess[:, 1, 1] = 2.0 * c22
    hess[:, 0, 1] = hess[:, 1, 0] = c12
    hess *= s / (sq * model.scale) ** 2
    lap = hess[:, 0, 0] + hess[:, 1, 1]
    return DerivativeField(grad=grad, lap=lap, scheme="implicit", hessian=hess, cond=cond,
                           fallback=np.zeros(len(rows), dtype=bool))


def implicit_derivatives_1d(model: KernelModel, x,
                            cfg: ImplicitConfig | None = None) -> DerivativeEstimate:
    """Implicit-scheme gradient and Laplacian at a single 1D point."""
    if model.dim != 1:
        raise InvalidInput("implicit_derivatives_1d needs a 1D model")
    return implicit_field(model, [float(np.asarray(x).reshape(-1)[0])], cfg)[0]


def implicit_derivatives_2d(model: KernelModel, x,
                            cfg: ImplicitConfig | None = None) -> DerivativeEstimate:
    """Implicit-scheme gradient, Hessian and Laplacian at a single 2D point."""
    if model.dim != 2:
        raise InvalidInput("implicit_derivatives_2d needs a 2D model")
    pt = as_points(x, 2)
    if pt.shape[0] != 1:
        raise InvalidInput("implicit_derivatives_2d takes a single point")
    return implicit_field(model, pt, cfg)[0]
