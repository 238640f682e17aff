"""Cubic smoothing spline reference for noisy derivative estimation."""

from __future__ import annotations

import numpy as np
from scipy.interpolate import UnivariateSpline

from ..errors import InvalidConfig, InvalidInput

__all__ = ["SmoothingSpline", "smoothing_spline", "spline_budget"]


class SmoothingSpline:
    """Evaluator returning value, first and second derivative."""

    def __init__(self, spline: UnivariateSpline, scale: float = 1.0):
        self._spl = spline
        self._scale = scale

    def __call__(self, x, nu: int = 0):
        return self._spl(np.asarray(x, dtype=float), nu) * self._scale

    def value(self, x):
        return self(x, 0)

    def grad(self, x):
        return self(x, 1)

    def lap(self, x):
        return self(x, 2)

    @property
    def residual(self) -> float:
        """Sum of squared residuals at the data (in fitted units)."""
        return float(self._spl.get_residual())


def smoothing_spline(x, y, w: float, *, normalize: bool = False) -> SmoothingSpline:
    """Cubic spline with summed squared residuals at most ``w``.

    ``w = 0`` interpolates the data.  With ``normalize`` the spline is fitted
    to ``y / max|y|`` so that ``w`` is a budget on the normalized field, then
    rescaled on evaluation.
    """
    if not w >= 0:
        raise InvalidConfig("smoothing budget w must be non-negative", key="w")
    x = np.asarray(x, dtype=float).reshape(-1)
    y = np.asarray(y, dtype=float).reshape(-1)
    if x.size != y.size or x.size < 4:
        raise InvalidInput("need at least 4 matching (x, y) samples")
    if np.any(np.diff(x) <= 0):
        raise InvalidInput("x must be strictly increasing")
    scale = float(np.max(np.abs(y))) if normalize else 1.0
    if scale == 0:
        scale = 1.0
    spl = UnivariateSpline(x, y / scale, k=3, s=float(w))
    return SmoothingSpline(spl, scale)


def spline_budget(n: int, s: float) -> float:
    """Residual budget ``N sigma^2`` with ``sigma = s / 3``."""
    return n * (s / 3.0) ** 2
