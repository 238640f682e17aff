"""Selecting the kernel width and preparing training data.

The kernel width is searched through the dimensionless ratio
``k = theta / d_typ**2`` where ``d_typ`` is the mean distance of each point
to its few nearest neighbors.  Each candidate is scored by the normalized
validation RMSE of the exact second-order prediction on a held-out split.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize_scalar
from scipy.spatial import Delaunay, cKDTree

from .errors import FitFailed, InsufficientData, InvalidConfig, KBRError
from .kernel import (KernelModel, TrainingSet, _predict_self_correction, predict_order1,
                     predict_order2_exact)

__all__ = [
    "SweepConfig",
    "NoiseConfig",
    "SweepResult",
    "typical_distance",
    "split_indices",
    "sweep_theta",
    "fit_theta",
    "add_noise",
]


@dataclass(frozen=True)
class SweepConfig:
    """Settings of the dimensionless kernel-width sweep."""

    k_min: float = 0.01
    k_max: float = 100.0
    n_sweep: int = 15
    knn: int = 5
    split_ratio: float = 0.9
    seed: int = 0
    refine: bool = False

    def __post_init__(self):
        if not 0 < self.k_min < self.k_max:
            raise InvalidConfig("need 0 < k_min < k_max", key="k_min")
        if self.n_sweep < 2:
            raise InvalidConfig("n_sweep must be at least 2", key="n_sweep")
        if not 0 < self.split_ratio < 1:
            raise InvalidConfig("split_ratio must lie in (0, 1)", key="split_ratio")
        if self.knn < 1:
            raise InvalidConfig("knn must be positive", key="knn")

    @property
    def k_values(self) -> np.ndarray:
        return np.logspace(np.log10(self.k_min), np.log10(self.k_max), self.n_sweep)


@dataclass(frozen=True)
class NoiseConfig:
    """Multiplicative noise ``phi (1 + zeta)`` with ``zeta ~ N(0, (s/3)^2)``."""

    s: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if not self.s >= 0:
            raise InvalidConfig("noise scale s must be non-negative", key="s")

    @property
    def sigma(self) -> float:
        return self.s / 3.0


@dataclass
class SweepResult:
    """Validation error for every swept ``k`` (``inf`` where the fit failed)."""

    k: np.ndarray
    theta: np.ndarray
    error: np.ndarray
    d_typ: float
    best: int
    train_idx: np.ndarray = field(repr=False)
    val_idx: np.ndarray = field(repr=False)

    @property
    def k_best(self) -> float:
        return float(self.k[self.best])

    @property
    def theta_best(self) -> float:
        return float(self.theta[self.best])


def typical_distance(points, knn: int = 5) -> float:
    """Mean over all points of the mean distance to their ``knn`` nearest neighbors."""
    pts = np.asarray(points, dtype=float)
    if pts.ndim == 1:
        pts = pts[:, None]
    if pts.shape[0] < knn + 1:
        raise InsufficientData(f"need at least {knn + 1} points for a {knn}-NN distance")
    dist, _ = cKDTree(pts).query(pts, k=knn + 1)
    return float(np.mean(dist[:, 1:]))


def split_indices(n: int, ratio: float, seed) -> tuple[np.ndarray, np.ndarray]:
    """Random disjoint (train, validation) index sets covering ``range(n)``."""
    rng = np.random.default_rng(seed)
    perm = rng.permutation(n)
    n_train = int(round(ratio * n))
    n_train = min(max(n_train, 1), n - 1)
    return np.sort(perm[:n_train]), np.sort(perm[n_train:])


def _box_scale(pts):
    # same isotropic unit-box scale that KernelModel uses
    extent = float(np.max(pts.max(axis=0) - pts.min(axis=0)))
    return extent if extent > 0 else 1.0


def _inside(train_pts, val_pts):
    """Points strictly inside the training bounding box and (D > 1) convex hull."""
    lo, hi = train_pts.min(axis=0), train_pts.max(axis=0)
    ok = np.all((val_pts > lo) & (val_pts < hi), axis=1)
    if train_pts.shape[1] > 1 and np.any(ok):
        ok[ok] = Delaunay(train_pts).find_simplex(val_pts[ok]) >= 0
    return ok


# the implicit score needs a well-conditioned system at this share of points
MIN_FINITE_SHARE = 0.9


def _implicit_value(model, pts):
    from .derivatives import ImplicitConfig, _frame, _implicit_solve

    frame = _frame(model, pts)
    X, _ = _implicit_solve(model, frame, np.arange(len(frame)), ImplicitConfig(), strict=False)
    return X[:, 0] * model.norm_field


def _validation_error(train: TrainingSet, val_pts, val_vals, theta, norm, method):
    try:
        model = KernelModel(train, theta)
        if method == "implicit":
            pred = _implicit_value(model, val_pts)
            ok = np.isfinite(pred)
            if ok.mean() < MIN_FINITE_SHARE:
                return np.inf
            return float(np.sqrt(np.mean(((pred[ok] - val_vals[ok]) / norm) ** 2)))
        if method == "exact":
            pred = predict_order2_exact(model, val_pts)
        elif method == "order1":
            pred = predict_order1(model, val_pts)
        else:
            pred = _predict_self_correction(model, val_pts)
    except (KBRError, FloatingPointError):
        return np.inf
    pred = np.atleast_1d(pred)
    if not np.all(np.isfinite(pred)):
        return np.inf
    return float(np.sqrt(np.mean(((pred - val_vals) / norm) ** 2)))


def sweep_theta(data: TrainingSet, cfg: SweepConfig = SweepConfig(), *, method: str | None = None,
                k_values=None) -> SweepResult:
    """Validation RMSE of the normalized field over a sweep of ``k``.

    ``method`` chooses the scored predictor: ``"exact"`` (the exact
    second-order correction, 1D), ``"self"`` (the older self-correction,
    kept for comparison), ``"implicit"`` (the value term of the implicit
    scheme's local quadratic, any dimension) or ``"order1"``
    (moment-corrected first order).  The default ``None`` means
    ``"exact"`` in 1D and ``"implicit"`` otherwise.  Only validation
    points strictly inside the training hull are scored; for
    ``"implicit"`` points with an ill-conditioned system are skipped, and
    a width where more than 10% of them are is rejected.
    """
    if method is None:
        method = "exact" if data.dimension == 1 else "implicit"
    if method not in ("exact", "self", "order1", "implicit"):
        raise InvalidConfig(f"unknown method {method!r}", key="method")
    pts = data.points
    d_typ = typical_distance(pts, cfg.knn)
    tr, va = split_indices(len(data), cfg.split_ratio, cfg.seed)
    train = TrainingSet(pts[tr], data.values[tr])
    inside = _inside(pts[tr], pts[va])
    va = va[inside]
    if va.size == 0:
        raise InsufficientData("no validation point lies inside the training hull")
    norm = float(np.max(np.abs(train.values)))
    ks = cfg.k_values if k_values is None else np.asarray(k_values, dtype=float)
    thetas = ks * d_typ ** 2
    scale = _box_scale(pts[tr])
    errs = np.array([
        _validation_error(train, pts[va], data.values[va], th / scale ** 2, norm, method)
        for th in thetas])
    if not np.any(np.isfinite(errs)):
        raise FitFailed("every swept kernel width failed")
    # argmin returns the first (smallest k) among ties
    best = int(np.argmin(errs))
    return SweepResult(k=ks, theta=thetas, error=errs, d_typ=d_typ, best=best,
                       train_idx=tr, val_idx=va)


def _refine(data, cfg, sweep, method):
    """Bounded scalar search in log k between the neighbors of the best sweep point."""
    i = sweep.best
    lo = np.log(sweep.k[max(i - 1, 0)])
    hi = np.log(sweep.k[min(i + 1, len(sweep.k) - 1)])
    if hi <= lo:
        return sweep.k_best

    def loss(logk):
        return sweep_theta(data, cfg, k_values=[np.exp(logk)], method=method).error[0]

    res = minimize_scalar(loss, bounds=(lo, hi), method="bounded",
                          options={"xatol": 1e-2, "maxiter": 20})
    k = float(np.exp(res.x))
    return k if res.fun < sweep.error[i] else sweep.k_best


def fit_theta(data: TrainingSet, cfg: SweepConfig = SweepConfig(), *, k_values=None,
              method: str | None = None, return_sweep: bool = False):
    """Sweep ``k``, pick the best validation error and retrain on all data.

    Returns the fitted :class:`KernelModel` (and the :class:`SweepResult`
    when ``return_sweep``).  The model stores ``k`` and ``d_typ`` as
    attributes for reference.
    """
    sweep = sweep_theta(data, cfg, k_values=k_values, method=method)
    k = _refine(data, cfg, sweep, method) if cfg.refine else sweep.k_best
    theta_phys = k * sweep.d_typ ** 2
    model = KernelModel(data, theta_phys / _box_scale(data.points) ** 2)
    model.k = k
    model.d_typ = sweep.d_typ
    return (model, sweep) if return_sweep else model


def add_noise(values, cfg: NoiseConfig) -> np.ndarray:
    """Multiplicative Gaussian corruption of field samples (seeded)."""
    values = np.asarray(values, dtype=float)
    if cfg.s == 0:
        return values.copy()
    rng = np.random.default_rng(cfg.seed)
    return values * (1.0 + rng.normal(0.0, cfg.sigma, size=values.shape))
