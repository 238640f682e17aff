"""Kernel weights, moment enforcement and the KBR predictions.

All numerics run in normalized coordinates: the training points are mapped
to the unit box by one isotropic affine map and the field is divided by
``max|phi|``.  Every public function accepts raw coordinates and returns raw
field units.

The kernel is the normalized Gaussian ``exp(-|x_i - c|^2 / theta)``.  A
Lagrange-multiplier shift ``c = x + lam`` is found per query point so the
weighted first moment of the training coordinates equals the query point.
Shifting the center of a Gaussian is the same as tilting it, so weights are
evaluated as ``exp((2 lam.d - |d|^2) / theta)`` with ``d = x_i - x``; this
stays accurate even for very large shifts near the hull boundary.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy.spatial import Delaunay, QhullError, cKDTree
from scipy.special import logsumexp

from .errors import (
    DegenerateCorrection,
    ExtrapolationWarning,
    InvalidInput,
    NotConverged,
    NumericalUnderflow,
)

__all__ = [
    "TrainingSet",
    "Weights",
    "LagrangeResult",
    "MomentError",
    "Frame",
    "KernelGeometry",
    "KernelModel",
    "as_points",
    "kernel_weights",
    "solve_lagrange_multiplier",
    "predict_order0",
    "predict_order1",
    "predict_order2_exact",
    "predict",
    "moment_errors",
    "interpolated_training_error",
]

TOL_MOMENT = 1e-12
TOL_THETA = 1e-12
# Extra guard relative to theta: c_k carries rounding noise of order
# eps * |phi| / Theta(x_k), so nearly-collapsed training stencils are dropped.
TOL_THETA_REL = 1e-4
MAX_ITER = 100
# kernel support radius in units of sqrt(theta); exp(-81) is far below eps
WINDOW = 9.0
# radius (in sqrt(theta)) that must stay covered around the tilted center;
# weights beyond it are below exp(-42) of the peak
COVER = 6.5
# query batch size; bounds the padded window arrays
CHUNK = 2048


def as_points(x, dim: int | None = None) -> np.ndarray:
    """Coerce scalars, 1D arrays or (M, D) arrays to an (M, D) float array."""
    arr = np.asarray(x, dtype=float)
    if arr.ndim == 0:
        arr = arr.reshape(1, 1)
    elif arr.ndim == 1:
        if dim is not None and dim > 1 and arr.shape[0] == dim:
            arr = arr.reshape(1, dim)
        else:
            arr = arr[:, None]
    if dim is not None and arr.shape[1] != dim:
        raise InvalidInput(f"expected {dim}-dimensional points, got shape {arr.shape}")
    return arr


@dataclass(frozen=True)
class TrainingSet:
    """Training coordinates with field samples; points must be distinct."""

    points: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        pts = as_points(self.points)
        vals = np.asarray(self.values, dtype=float).reshape(-1)
        if pts.shape[0] != vals.shape[0]:
            raise InvalidInput(
                f"{pts.shape[0]} points but {vals.shape[0]} values")
        if pts.shape[0] < 1:
            raise InvalidInput("empty training set")
        if not (np.all(np.isfinite(pts)) and np.all(np.isfinite(vals))):
            raise InvalidInput("training data must be finite")
        if pts.shape[0] > 1:
            if pts.shape[1] == 1:
                gap = np.min(np.diff(np.sort(pts[:, 0])))
            else:
                gap = np.min(cKDTree(pts).query(pts, k=2)[0][:, 1])
            if gap <= 0:
                raise InvalidInput("training points must be pairwise distinct")
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "values", vals)

    @property
    def dimension(self) -> int:
        return self.points.shape[1]

    def __len__(self):
        return self.points.shape[0]


@dataclass(frozen=True)
class Weights:
    w: np.ndarray
    center: np.ndarray


@dataclass(frozen=True)
class LagrangeResult:
    x_tilde: np.ndarray
    weights: Weights
    iterations: int
    residual: float
    converged: bool


@dataclass(frozen=True)
class MomentError:
    """Second-moment errors at a query point (normalized coordinates).

    ``theta_corrected`` and ``theta_raw`` are scalars in 1D and per-axis
    vectors in higher dimensions.  ``theta_train`` holds the error of every
    training point evaluated with that point's own converged weights, which
    is the quantity the exact correction divides by.
    """

    theta_corrected: np.ndarray
    theta_raw: np.ndarray
    theta_train: np.ndarray


class Frame:
    """Converged kernel state for a batch of query points.

    Holds the neighbor window, local offsets ``d = x_i - x`` and the
    Lagrange shift ``lam`` so that extra weight sets (uncorrected, perturbed)
    can be evaluated on the same support.
    """

    def __init__(self, geometry, centers, idx, mask, lam, residual, iterations,
                 converged):
        self.geometry = geometry
        self.centers = centers
        self.idx = idx
        self.mask = mask
        self.lam = lam
        self.residual = residual
        self.iterations = iterations
        self.converged = converged

    @cached_property
    def d(self) -> np.ndarray:
        return self.geometry.points[self.idx] - self.centers[:, None, :]

    def weights(self, shift=None) -> np.ndarray:
        """Weights for kernel centers at ``x + shift`` (default: the Lagrange shift)."""
        lam = self.lam if shift is None else np.broadcast_to(
            np.asarray(shift, dtype=float), self.lam.shape)
        return _tilted_weights(self.d, self.mask, lam, self.geometry.theta)

    @cached_property
    def w(self) -> np.ndarray:
        return self.weights()

    @cached_property
    def w0(self) -> np.ndarray:
        return self.weights(np.zeros_like(self.lam))

    def gather(self, values) -> np.ndarray:
        return np.asarray(values)[self.idx]

    def __len__(self):
        return self.centers.shape[0]


def _tilted_weights(d, mask, lam, theta):
    logw = (2.0 * np.einsum("mkd,md->mk", d, lam) - np.einsum("mkd,mkd->mk", d, d)) / theta
    logw = np.where(mask, logw, -np.inf)
    logw -= logw.max(axis=1, keepdims=True)
    w = np.exp(logw)
    total = w.sum(axis=1, keepdims=True)
    if not np.all(np.isfinite(total)) or np.any(total <= 0):
        raise NumericalUnderflow("kernel weights underflowed for some center")
    return w / total


class KernelGeometry:
    """Training coordinates (normalized) plus kernel width; no field values."""

    def __init__(self, points, theta, *, tol_moment=TOL_MOMENT, max_iter=MAX_ITER):
        if not theta > 0:
            raise InvalidInput(f"theta must be positive, got {theta}")
        self.points = as_points(points)
        self.theta = float(theta)
        self.sqrt_theta = float(np.sqrt(theta))
        self.tol_moment = tol_moment
        self.max_iter = int(max_iter)
        self.n, self.dim = self.points.shape
        self.radius = WINDOW * self.sqrt_theta
        self.cover = COVER * self.sqrt_theta
        if self.dim == 1:
            self._order = np.argsort(self.points[:, 0])
            self._sorted = self.points[self._order, 0]
        else:
            self._tree = cKDTree(self.points)

    @cached_property
    def _delaunay(self):
        try:
            return Delaunay(self.points)
        except QhullError:
            # degenerate (e.g. collinear) point sets have no triangulation
            return None

    # -- neighbor windows -------------------------------------------------

    def window(self, centers, radius, anchors=None):
        """Index windows (padded) of training points within ``radius``.

        The nearest neighbors of each ``anchor`` (default: the center) are
        always included, and in D > 1 also the vertices of the Delaunay
        simplex holding the anchor, so the moment condition stays solvable
        for any anchor inside the hull.
        """
        centers = as_points(centers, self.dim)
        anchors = centers if anchors is None else as_points(anchors, self.dim)
        radius = np.broadcast_to(np.asarray(radius, dtype=float), centers.shape[:1])
        if self.dim == 1:
            return self._window_1d(centers[:, 0], radius, anchors[:, 0])
        return self._window_nd(centers, radius, anchors)

    def _window_1d(self, c, radius, a):
        s = self._sorted
        n = self.n
        lo = np.searchsorted(s, c - radius, side="left")
        hi = np.searchsorted(s, c + radius, side="right")
        short = hi - lo < min(3, n)
        if np.any(short):
            need = min(3, n)
            pos = np.searchsorted(s, c[short])
            lo[short] = np.clip(pos - need // 2 - 1, 0, n - need)
            hi[short] = np.maximum(hi[short], lo[short] + need)
        width = int(np.max(hi - lo))
        j = lo[:, None] + np.arange(width)[None, :]
        mask = j < hi[:, None]
        # the nearest neighbor on each side of the anchor, as extra columns
        # unless the main range already holds it
        pa = np.searchsorted(s, a)
        nb = np.stack([np.maximum(pa - 1, 0), np.minimum(pa, n - 1)], axis=1)
        nb_mask = (nb < lo[:, None]) | (nb >= hi[:, None])
        nb_mask[:, 1] &= nb[:, 1] != nb[:, 0]
        j = np.hstack([np.minimum(j, n - 1), nb])
        mask = np.hstack([mask, nb_mask])
        return self._order[j], mask

    def _window_nd(self, c, radius, a):
        kmin = min(self.n, 2 * self.dim + 3)
        lists = self._tree.query_ball_point(c, radius)
        _, near = self._tree.query(a, k=kmin)
        near = np.atleast_2d(near)
        if self._delaunay is not None:
            simplex = self._delaunay.find_simplex(a)
            verts = self._delaunay.simplices[np.maximum(simplex, 0)]
            # outside the hull: nothing to add, repeat the nearest point
            verts = np.where((simplex >= 0)[:, None], verts, near[:, :1])
            near = np.hstack([near, verts])
        rows = [np.union1d(np.asarray(li, dtype=int), nb) for li, nb in zip(lists, near)]
        width = max(len(r) for r in rows)
        idx = np.zeros((len(rows), width), dtype=int)
        mask = np.zeros((len(rows), width), dtype=bool)
        for m, r in enumerate(rows):
            idx[m, : len(r)] = r
            idx[m, len(r):] = r[0]
            mask[m, : len(r)] = True
        return idx, mask

    # -- Lagrange multiplier ---------------------------------------------

    def solve(self, centers, max_iter=None) -> Frame:
        """Converged Lagrange shifts for a batch of query points."""
        centers = as_points(centers, self.dim)
        max_iter = self.max_iter if max_iter is None else int(max_iter)
        if max_iter < 1:
            raise InvalidInput("max_iter must be >= 1")
        if len(centers) > CHUNK:
            parts = [self.solve(centers[i:i + CHUNK], max_iter)
                     for i in range(0, len(centers), CHUNK)]
            return _concat_frames(self, centers, parts)
        idx, mask = self.window(centers, self.radius)
        d = self.points[idx] - centers[:, None, :]
        lam, res, it, conv = self._newton(d, mask, max_iter)
        frame = Frame(self, centers, idx, mask, lam, res, it, conv)
        # Tilted weights peak around x + lam (clipped to the data box), so
        # the support must cover a ball about that point; rows whose window
        # does not are re-windowed there and re-solved.
        wc = centers.copy()
        wr = np.full(len(centers), self.radius)
        lo, hi = self.points.min(axis=0), self.points.max(axis=0)
        for _ in range(8):
            target = np.clip(centers + frame.lam, lo, hi)
            off = np.linalg.norm(target - wc, axis=1)
            grow = off + self.cover > wr * (1 + 1e-9)
            if not np.any(grow):
                break
            rows = np.flatnonzero(grow)
            wc[rows] = target[rows]
            wr[rows] = self.radius
            idx2, mask2 = self.window(wc[rows], wr[rows], anchors=centers[rows])
            d2 = self.points[idx2] - centers[rows][:, None, :]
            lam2, res2, it2, conv2 = self._newton(d2, mask2, max_iter, frame.lam[rows])
            frame = _merge_frames(frame, rows, idx2, mask2, lam2, res2,
                                  it2 + frame.iterations[rows], conv2)
        return frame

    def _newton(self, d, mask, max_iter, lam0=None):
        if self.dim == 1:
            lam, res, it, conv = _newton_1d(d[:, :, 0], mask, self.theta, self.tol_moment,
                                            max_iter, None if lam0 is None else lam0[:, 0])
            return lam[:, None], res, it, conv
        return _newton_nd(d, mask, self.theta, self.tol_moment, max_iter, lam0)

    # -- training-point self state (used by the exact correction) ----------

    @cached_property
    def train_frame(self) -> Frame:
        return self.solve(self.points)

    @cached_property
    def train_theta(self) -> np.ndarray:
        """Second-moment error of each training point with its own weights.

        Per axis in D > 1; shape (N,) in 1D.
        """
        f = self.train_frame
        mom = np.einsum("mk,mkd->md", f.w, f.d * f.d)
        return mom[:, 0] if self.dim == 1 else mom

    @cached_property
    def train_kept(self) -> np.ndarray:
        """Training points whose correction term is well defined."""
        if self.dim != 1:
            raise InvalidInput("the exact correction is defined for 1D data only")
        f = self.train_frame
        xs = self.points[:, 0]
        scale = np.einsum("mk,mk->m", f.w, self.points[f.idx, 0] ** 2)
        kept = f.converged & (self.train_theta > TOL_THETA * scale.max())
        # hull extremes have no finite multiplier; their term is 0/0
        kept &= (xs > xs.min()) & (xs < xs.max())
        return kept

    @cached_property
    def train_preferred(self) -> np.ndarray:
        """Kept points whose stencil is not nearly collapsed (Theta_k vs theta)."""
        return self.train_kept & (self.train_theta > TOL_THETA_REL * self.theta)

    def curvature(self, values) -> np.ndarray:
        """Per-training-point quadratic coefficient estimate ``c_k``.

        ``c_k = (phi_k - phi1(x_k)) / Theta(x_k)`` with both the first-order
        prediction and the moment error taken with point ``k``'s own
        converged weights; equals ``-c`` exactly for a quadratic field.
        Excluded points get 0.
        """
        f = self.train_frame
        values = np.asarray(values)
        # sum of w_j (phi_k - phi_j): no cancellation against phi_k itself
        num = np.einsum("mk,mk->m", f.w, values[:, None] - values[f.idx])
        kept = self.train_kept
        out = np.zeros(self.n)
        out[kept] = num[kept] / self.train_theta[kept]
        return out

    def correction_weights(self, frame: Frame):
        """Weights of the curvature terms for each row of ``frame``.

        Returns ``(idx, wk, ok)``: training indices (the frame window plus
        one extra column), weights summing to one per row, and a flag for
        rows that received any correction.  Preferred terms are used where
        the window reaches one; otherwise any usable term in the window;
        otherwise the nearest preferred training point alone.  Every such
        choice is a convex combination, so quadratic exactness is kept.
        """
        m = len(frame)
        wk = np.where(self.train_preferred[frame.idx] & frame.mask, frame.w, 0.0)
        tot = wk.sum(axis=1)
        bare = tot == 0
        if np.any(bare):
            kept2 = self.train_kept[frame.idx[bare]] & frame.mask[bare]
            wk[bare] = np.where(kept2, frame.w[bare], 0.0)
            tot[bare] = wk[bare].sum(axis=1)
        extra_idx = np.zeros((m, 1), dtype=frame.idx.dtype)
        extra_w = np.zeros((m, 1))
        bare = tot == 0
        pref = np.flatnonzero(self.train_preferred)
        if np.any(bare) and pref.size:
            _, near = cKDTree(self.points[pref]).query(frame.centers[bare])
            extra_idx[bare, 0] = pref[near]
            extra_w[bare, 0] = 1.0
            tot[bare] = 1.0
        ok = tot > 0
        wk[ok] /= tot[ok, None]
        return np.hstack([frame.idx, extra_idx]), np.hstack([wk, extra_w]), ok

    def interpolation_matrix(self, centers) -> np.ndarray:
        """Dense (M, N) matrix of the linear map values -> exact prediction.

        The second-order prediction is linear in the field samples, so on a
        fixed geometry it can be precomputed once and reused.
        """
        frame = self.solve(centers)
        _require_converged(frame)
        m = len(frame)
        mat = np.zeros((m, self.n))
        rows = np.repeat(np.arange(m), frame.idx.shape[1])
        np.add.at(mat, (rows, frame.idx.ravel()), np.where(frame.mask, frame.w, 0.0).ravel())
        # correction: Theta(x) * sum_k wk_k (e_k - w_k.) / Theta_k
        ft = self.train_frame
        kept = self.train_kept
        tk = np.where(kept, self.train_theta, 1.0)
        tmat = np.zeros((self.n, self.n))
        tmat[np.arange(self.n), np.arange(self.n)] = np.where(kept, 1.0 / tk, 0.0)
        trow = np.repeat(np.arange(self.n), ft.idx.shape[1])
        contrib = -np.where(ft.mask, ft.w, 0.0) * np.where(kept, 1.0 / tk, 0.0)[:, None]
        np.add.at(tmat, (trow, ft.idx.ravel()), contrib.ravel())
        cidx, wk, ok = self.correction_weights(frame)
        theta_x = np.einsum("mk,mk->m", frame.w, frame.d[:, :, 0] ** 2)
        dense_wk = np.zeros((m, self.n))
        crow = np.repeat(np.arange(m), cidx.shape[1])
        np.add.at(dense_wk, (crow, cidx.ravel()), wk.ravel())
        mat += (theta_x * ok)[:, None] * (dense_wk @ tmat)
        return mat


def _concat_frames(geometry, centers, parts):
    width = max(p.idx.shape[1] for p in parts)
    idx, mask = [], []
    for p in parts:
        extra = width - p.idx.shape[1]
        idx.append(np.hstack([p.idx, np.repeat(p.idx[:, :1], extra, axis=1)]))
        mask.append(np.hstack([p.mask, np.zeros((len(p.mask), extra), dtype=bool)]))
    cat = lambda name: np.concatenate([getattr(p, name) for p in parts])
    return Frame(geometry, centers, np.vstack(idx), np.vstack(mask), cat("lam"),
                 cat("residual"), cat("iterations"), cat("converged"))


def _merge_frames(frame, which, idx2, mask2, lam2, res2, it2, conv2):
    width = max(frame.idx.shape[1], idx2.shape[1])

    def pad(a, fill):
        out = np.full((a.shape[0], width), fill, dtype=a.dtype)
        out[:, : a.shape[1]] = a
        return out

    idx = pad(frame.idx, 0)
    mask = pad(frame.mask, False)
    idx[:, frame.idx.shape[1]:] = frame.idx[:, :1]
    idx[which] = pad(idx2, 0)
    idx[which, idx2.shape[1]:] = idx2[:, :1]
    mask[which] = pad(mask2, False)
    lam = frame.lam.copy()
    lam[which] = lam2
    res = frame.residual.copy()
    res[which] = res2
    it = frame.iterations.copy()
    it[which] = it2
    conv = frame.converged.copy()
    conv[which] = conv2
    return Frame(frame.geometry, frame.centers, idx, mask, lam, res, it, conv)


def _newton_1d(d, mask, theta, tol, max_iter, lam0=None):
    """Safeguarded Newton on g(lam) = sum_i d_i w_i(lam) for every row.

    g is increasing (its slope is 2/theta times a weighted variance), so a
    bracket is kept and bisection takes over whenever Newton leaves it.
    Rows keep iterating a couple of steps past ``tol`` to polish the root.
    """
    m = d.shape[0]
    sq = np.sqrt(theta)
    lam = np.zeros(m) if lam0 is None else np.array(lam0, dtype=float)
    lo = np.full(m, -np.inf)
    hi = np.full(m, np.inf)
    span = np.full(m, 2.0 * sq)
    res = np.full(m, np.inf)
    its = np.zeros(m, dtype=int)
    extra = np.zeros(m, dtype=int)
    active = np.arange(m)
    dd = np.where(mask, d, 0.0)
    for _ in range(max_iter):
        if active.size == 0:
            break
        da, ma, la = dd[active], mask[active], lam[active]
        w = _tilted_weights(da[:, :, None], ma, la[:, None], theta)
        g = np.einsum("mk,mk->m", w, da)
        var = np.einsum("mk,mk->m", w, da * da) - g * g
        its[active] += 1
        res[active] = g
        hi[active] = np.where(g > 0, np.minimum(hi[active], la), hi[active])
        lo[active] = np.where(g < 0, np.maximum(lo[active], la), lo[active])
        small = np.abs(g) <= tol
        extra[active] += small
        # polish down to the rounding level of the moment sum itself
        floor = 8.0 * np.finfo(float).eps * np.einsum("mk,mk->m", w, np.abs(da))
        stop = (g == 0) | (extra[active] > 4) | (small & (np.abs(g) <= floor))
        with np.errstate(divide="ignore", invalid="ignore"):
            step = la - g * theta / (2.0 * var)
        lo_a, hi_a = lo[active], hi[active]
        ok = np.isfinite(step) & (step >= lo_a) & (step <= hi_a)
        # Newton no longer moves lam: the root is resolved to rounding
        stop |= small & ok & (np.abs(step - la) <= 4 * np.finfo(float).eps * np.abs(la))
        both = np.isfinite(lo_a) & np.isfinite(hi_a)
        with np.errstate(invalid="ignore"):
            bis = 0.5 * (lo_a + hi_a)
        expand = np.where(g > 0, la - span[active], la + span[active])
        new = np.where(ok, step, np.where(both, bis, expand))
        span[active] = np.where(~ok & ~both, 2.0 * span[active], span[active])
        lam[active] = np.where(stop, la, new)
        active = active[~stop]
    conv = np.abs(res) <= tol
    return lam, np.abs(res), its, conv


def _log_partition(d, mask, lam, theta):
    logw = (2.0 * np.einsum("mkd,md->mk", d, lam) - np.einsum("mkd,mkd->mk", d, d)) / theta
    return logsumexp(np.where(mask, logw, -np.inf), axis=1)


def _newton_nd(d, mask, theta, tol, max_iter, lam0=None):
    """Damped Newton for the moment condition in D > 1.

    The condition is the stationarity of the convex log-partition function
    of the tilted weights, so each step is a regularized Newton step on that
    function with a backtracking (Armijo) line search.  Steps are capped at
    a few kernel widths, which lets a shift escape a single dominant point
    where the weighted covariance is nearly singular.
    """
    m, _, dim = d.shape
    lam = np.zeros((m, dim)) if lam0 is None else np.array(lam0, dtype=float)
    dd = np.where(mask[:, :, None], d, 0.0)
    cap = 4.0 * np.sqrt(theta)
    eye = np.eye(dim)

    res = np.full(m, np.inf)
    its = np.zeros(m, dtype=int)
    extra = np.zeros(m, dtype=int)
    active = np.arange(m)
    w = _tilted_weights(dd, mask, lam, theta)
    g = np.einsum("mk,mkd->md", w, dd)
    f = _log_partition(dd, mask, lam, theta)
    for _ in range(max_iter):
        if active.size == 0:
            break
        gn = np.linalg.norm(g, axis=1)
        res[active] = gn
        its[active] += 1
        small = gn <= tol
        extra[active] += small
        stop = (gn == 0) | (extra[active] > 2) | (small & (gn <= 1e-4 * tol))
        keep = ~stop
        active, w, g, gn, f = active[keep], w[keep], g[keep], gn[keep], f[keep]
        if active.size == 0:
            break
        da = dd[active]
        cov = np.einsum("mk,mki,mkj->mij", w, da, da) - np.einsum("mi,mj->mij", g, g)
        # the objective's Hessian is (4/theta^2) cov and its gradient (2/theta) g
        mu = 1e-10 * theta + 1e-12 * np.trace(cov, axis1=1, axis2=2)
        step = -0.5 * theta * np.linalg.solve(cov + mu[:, None, None] * eye, g[..., None])[..., 0]
        norm = np.linalg.norm(step, axis=1)
        # the cap grows with the shift so distant optima are reached geometrically
        lim = np.maximum(cap, 0.5 * np.linalg.norm(lam[active], axis=1))
        step *= np.minimum(1.0, lim / np.maximum(norm, 1e-300))[:, None]
        slope = 2.0 / theta * np.einsum("md,md->m", g, step)
        lam_a = lam[active]
        t = np.ones(active.size)
        accepted = np.zeros(active.size, dtype=bool)
        new_f = f.copy()
        for _h in range(40):
            pending = np.flatnonzero(~accepted)
            if pending.size == 0:
                break
            trial = lam_a[pending] + t[pending, None] * step[pending]
            ft = _log_partition(dd[active[pending]], mask[active[pending]], trial, theta)
            ok = ft <= f[pending] + 1e-4 * t[pending] * slope[pending]
            # near the optimum the objective stalls in rounding; accept a
            # full step that does not increase it noticeably
            ok |= (t[pending] == 1.0) & (ft <= f[pending] + 1e-13 * (1.0 + np.abs(f[pending])))
            sel = pending[ok]
            lam[active[sel]] = trial[ok]
            new_f[sel] = ft[ok]
            accepted[sel] = True
            t[pending[~ok]] *= 0.5
        stuck = ~accepted
        extra[active[stuck]] = 99
        f = new_f
        w = _tilted_weights(dd[active], mask[active], lam[active], theta)
        g = np.einsum("mk,mkd->md", w, dd[active])
    conv = res <= tol
    return lam, res, its, conv


def _require_converged(frame: Frame):
    if not np.all(frame.converged):
        bad = np.flatnonzero(~frame.converged)
        raise NotConverged(
            f"Lagrange multiplier did not converge for {bad.size} point(s)",
            residual=float(np.max(frame.residual[bad])), index=bad)


class KernelModel:
    """Trained KBR state: normalized training data and the kernel width.

    ``theta`` is expressed in normalized (unit-box) coordinates.
    """

    def __init__(self, training: TrainingSet, theta: float, *, tol_moment=TOL_MOMENT,
                 max_iter=MAX_ITER, geometry: KernelGeometry | None = None):
        if not theta > 0:
            raise InvalidInput(f"theta must be positive, got {theta}")
        self.training = training
        self.theta = float(theta)
        norm = float(np.max(np.abs(training.values)))
        if not norm > 0:
            raise InvalidInput("field is identically zero; cannot normalize")
        self.norm_field = norm
        pts = training.points
        self.origin = pts.min(axis=0)
        extent = float(np.max(pts.max(axis=0) - self.origin))
        self.scale = extent if extent > 0 else 1.0
        if geometry is None:
            geometry = KernelGeometry(self.normalize(pts), theta, tol_moment=tol_moment,
                                      max_iter=max_iter)
        self.geometry = geometry
        self.values_n = training.values / norm

    @classmethod
    def from_arrays(cls, points, values, theta, **kw) -> "KernelModel":
        return cls(TrainingSet(points, values), theta, **kw)

    def with_values(self, values) -> "KernelModel":
        """Same points and theta with new field samples (geometry reused)."""
        return KernelModel(TrainingSet(self.training.points, values), self.theta,
                           geometry=self.geometry)

    @property
    def dim(self) -> int:
        return self.training.dimension

    def normalize(self, x) -> np.ndarray:
        return (as_points(x, self.dim) - self.origin) / self.scale

    def denormalize(self, xn) -> np.ndarray:
        return as_points(xn, self.dim) * self.scale + self.origin

    @cached_property
    def curvature(self) -> np.ndarray:
        return self.geometry.curvature(self.values_n)

    def frame(self, x, max_iter=None) -> Frame:
        xn = self.normalize(x)
        _warn_extrapolation(self.geometry, xn)
        return self.geometry.solve(xn, max_iter=max_iter)


def _warn_extrapolation(geom: KernelGeometry, xn):
    lo = geom.points.min(axis=0) - geom.sqrt_theta
    hi = geom.points.max(axis=0) + geom.sqrt_theta
    outside = np.any((xn < lo) | (xn > hi), axis=1)
    if np.any(outside):
        warnings.warn(f"{int(outside.sum())} query point(s) lie outside the training "
                      "hull by more than sqrt(theta)", ExtrapolationWarning, stacklevel=3)


def _scalar_out(x, arr):
    # a scalar (1D) or a single coordinate vector (D > 1) gives a float back
    a = np.asarray(x)
    if a.ndim == 0 or (a.ndim == 1 and arr.shape[0] == 1 and a.size > 1):
        return float(arr[0])
    return arr


# ---------------------------------------------------------------------------
# public operations


def kernel_weights(model: KernelModel, center) -> Weights:
    """Normalized Gaussian weights of all training points about ``center``."""
    c = model.normalize(center)
    if c.shape[0] != 1 or not np.all(np.isfinite(c)):
        raise InvalidInput("center must be a single finite coordinate")
    d = model.geometry.points - c
    with np.errstate(over="ignore", invalid="ignore"):
        logw = -np.einsum("kd,kd->k", d, d) / model.theta
        logw -= logw.max()
        w = np.exp(logw)
        total = w.sum()
    if not (np.isfinite(total) and total > 0):
        raise NumericalUnderflow("all kernel values underflowed")
    return Weights(w / total, model.denormalize(c)[0])


def solve_lagrange_multiplier(model: KernelModel, x, max_iter: int = MAX_ITER, *,
                              raise_on_failure: bool = True) -> LagrangeResult:
    """Kernel-center shift that makes the weighted first moment equal ``x``.

    The residual is reported in normalized coordinates.
    """
    frame = model.frame(x, max_iter=max_iter)
    if len(frame) != 1:
        raise InvalidInput("solve_lagrange_multiplier takes a single point")
    if raise_on_failure:
        _require_converged(frame)
    w = np.zeros(model.geometry.n)
    np.add.at(w, frame.idx[0], np.where(frame.mask[0], frame.w[0], 0.0))
    xt = model.denormalize(frame.centers + frame.lam)[0]
    return LagrangeResult(x_tilde=xt, weights=Weights(w, xt), iterations=int(frame.iterations[0]),
                          residual=float(frame.residual[0]), converged=bool(frame.converged[0]))


def _field(model, frame):
    return model.values_n[frame.idx]


def predict_order0(model: KernelModel, x):
    """Uncorrected prediction: weights centered at the query point itself."""
    frame = model.frame(x)
    out = np.einsum("mk,mk->m", frame.w0, _field(model, frame)) * model.norm_field
    return _scalar_out(x, out)


def predict_order1(model: KernelModel, x, lag: LagrangeResult | None = None):
    """First-order prediction with moment-corrected weights."""
    if lag is not None:
        if not lag.converged:
            raise NotConverged("Lagrange result is not converged", residual=lag.residual)
        return float(lag.weights.w @ model.training.values)
    frame = model.frame(x)
    _require_converged(frame)
    out = np.einsum("mk,mk->m", frame.w, _field(model, frame)) * model.norm_field
    return _scalar_out(x, out)


def moment_errors(model: KernelModel, x, lag: LagrangeResult | None = None) -> MomentError:
    """Second-moment errors at a single query point (normalized coordinates)."""
    xn = model.normalize(x)
    if xn.shape[0] != 1:
        raise InvalidInput("moment_errors takes a single point")
    pts = model.geometry.points
    if lag is not None:
        if not lag.converged:
            raise NotConverged("Lagrange result is not converged", residual=lag.residual)
        w = lag.weights.w
    else:
        frame = model.geometry.solve(xn)
        _require_converged(frame)
        w = np.zeros(model.geometry.n)
        np.add.at(w, frame.idx[0], np.where(frame.mask[0], frame.w[0], 0.0))
    w0 = kernel_weights(model, model.denormalize(xn)[0]).w
    t_corr = np.einsum("k,kd->d", w, pts ** 2) - xn[0] ** 2
    t_raw = np.einsum("k,kd->d", w0, pts ** 2) - xn[0] ** 2
    theta_train = model.geometry.train_theta
    if model.dim == 1:
        return MomentError(float(t_corr[0]), float(t_raw[0]), theta_train)
    return MomentError(t_corr, t_raw, theta_train)


def _order2_from_frame(model: KernelModel, frame: Frame, strict: bool):
    phi = _field(model, frame)
    phi1 = np.einsum("mk,mk->m", frame.w, phi)
    theta_x = np.einsum("mk,mk->m", frame.w, frame.d[:, :, 0] ** 2)
    cidx, wk, ok = model.geometry.correction_weights(frame)
    if strict and not np.all(ok):
        raise DegenerateCorrection(
            f"all correction terms excluded at {int((~ok).sum())} point(s)")
    ck = model.curvature[cidx]
    return phi1 + theta_x * np.einsum("mk,mk->m", wk, ck), phi1, theta_x


def predict_order2_exact(model: KernelModel, x, *, strict: bool = False):
    """Second-order prediction exact for quadratic fields (1D).

    ``phi1(x) + Theta(x) * sum_k P_k c_k`` where ``c_k`` is the per-training-
    point curvature estimate.  When every correction term is excluded the
    first-order value is returned, or ``DegenerateCorrection`` is raised if
    ``strict``.
    """
    if model.dim != 1:
        raise InvalidInput("the exact second-order prediction is defined for 1D data")
    frame = model.frame(x)
    _require_converged(frame)
    out, _, _ = _order2_from_frame(model, frame, strict)
    return _scalar_out(x, out * model.norm_field)


def predict(model: KernelModel, x):
    """Alias of :func:`predict_order2_exact` for array inputs."""
    return predict_order2_exact(model, x)


def _predict_self_correction(model: KernelModel, x):
    """Original self-correction ``sum_i (2 phi_i - phi1(x_i)) P_i``.

    Comparison baseline only.
    """
    frame = model.frame(x)
    _require_converged(frame)
    geom = model.geometry
    ft = geom.train_frame
    phi1_train = np.einsum("mk,mk->m", ft.w, model.values_n[ft.idx])
    target = 2.0 * model.values_n - phi1_train
    out = np.einsum("mk,mk->m", frame.w, target[frame.idx])
    return _scalar_out(x, out * model.norm_field)


def interpolated_training_error(model: KernelModel, x):
    """Diagnostic: training-point moment errors interpolated to ``x``."""
    frame = model.frame(x)
    _require_converged(frame)
    out = np.einsum("mk,mk->m", frame.w, model.geometry.train_theta[frame.idx])
    return _scalar_out(x, out)
