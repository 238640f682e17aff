"""Error measures for fields, derivatives and captured shocks."""

from __future__ import annotations

from dataclasses import dataclass, asdict

import numpy as np

from .errors import InvalidInput, MetricUndefined

__all__ = [
    "normalized_rmse",
    "mse",
    "rmse",
    "ShockMetrics",
    "SOD_WINDOWS",
    "shock_metrics",
    "shock_thickness",
    "level_crossing",
    "loglog_slope",
]

# (shock window, post-shock window) of the two observed Sod regions at t = 0.15
SOD_WINDOWS = {
    "region1": ((0.62, 0.67), (0.64, 0.72)),
    "region2": ((0.73, 0.77), (0.755, 0.80)),
}


def _pair(predicted, exact):
    p = np.asarray(predicted, dtype=float).reshape(-1)
    e = np.asarray(exact, dtype=float).reshape(-1)
    if p.size == 0:
        raise InvalidInput("empty input")
    if p.size != e.size:
        raise InvalidInput("predicted and exact must have equal lengths")
    return p, e


def mse(predicted, exact) -> float:
    p, e = _pair(predicted, exact)
    return float(np.mean((p - e) ** 2))


def rmse(predicted, exact) -> float:
    return float(np.sqrt(mse(predicted, exact)))


def normalized_rmse(predicted, exact, field_max: float) -> float:
    """``sqrt(mean((p - e)^2)) / field_max``."""
    if not field_max > 0:
        raise InvalidInput("field_max must be positive")
    return rmse(predicted, exact) / float(field_max)


def loglog_slope(n, err) -> float:
    """Least-squares slope of ``log10 err`` against ``log10 n``."""
    n = np.asarray(n, dtype=float)
    err = np.asarray(err, dtype=float)
    ok = (n > 0) & (err > 0) & np.isfinite(err)
    if ok.sum() < 2:
        raise MetricUndefined("need at least two positive error values for a slope")
    return float(np.polyfit(np.log10(n[ok]), np.log10(err[ok]), 1)[0])


def level_crossing(x, y, level: float) -> float:
    """First location where the piecewise-linear profile ``y(x)`` reaches ``level``."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float) - level
    if y.size == 0:
        raise MetricUndefined("empty profile")
    hit = np.flatnonzero(y == 0)
    sign = np.flatnonzero(y[:-1] * y[1:] < 0)
    cands = []
    if hit.size:
        cands.append(x[hit[0]])
    if sign.size:
        i = sign[0]
        cands.append(x[i] + (x[i + 1] - x[i]) * y[i] / (y[i] - y[i + 1]))
    if not cands:
        raise MetricUndefined(f"profile never reaches level {level:g}")
    return float(min(cands))


def shock_thickness(x, numerical, exact_lo: float, exact_hi: float) -> float:
    """Distance between the 10% and 90% crossings of the jump ``exact_lo -> exact_hi``."""
    jump = exact_hi - exact_lo
    if jump == 0:
        raise MetricUndefined("no jump in the window")
    x10 = level_crossing(x, numerical, exact_lo + 0.1 * jump)
    x90 = level_crossing(x, numerical, exact_lo + 0.9 * jump)
    return abs(x90 - x10)


@dataclass(frozen=True)
class ShockMetrics:
    """Shock-capturing measures; ``thickness`` is None when undefined."""

    l1: float
    linf: float
    thickness: float | None
    post_shock_osc: float
    tv: float
    window_shock: tuple
    window_post: tuple

    def as_dict(self) -> dict:
        return asdict(self)


def _in(x, window):
    return (x >= window[0]) & (x <= window[1])


def shock_metrics(numerical, exact, grid, window_shock, window_post) -> ShockMetrics:
    """Global L1/Linf errors plus thickness, oscillation and TV in the windows.

    ``grid`` is the node coordinates (or a :class:`~kbr.grid.Grid1D`).  The
    jump used for the thickness is the exact solution's value range inside
    the shock window, oriented left to right.
    """
    x = np.asarray(getattr(grid, "nodes", grid), dtype=float)
    num, ex = _pair(numerical, exact)
    if x.size != num.size:
        raise InvalidInput("grid and profiles must have equal lengths")
    err = np.abs(num - ex)
    ws, wp = _in(x, window_shock), _in(x, window_post)
    if not ws.any() or not wp.any():
        raise InvalidInput("a window contains no grid node")
    xs, ns, es = x[ws], num[ws], ex[ws]
    try:
        thickness = shock_thickness(xs, ns, float(es[0]), float(es[-1]))
    except MetricUndefined:
        thickness = None
    return ShockMetrics(
        l1=float(np.mean(err)),
        linf=float(np.max(err)),
        thickness=thickness,
        post_shock_osc=float(np.max(err[wp])),
        tv=float(np.sum(np.abs(np.diff(ns)))),
        window_shock=tuple(window_shock),
        window_post=tuple(window_post),
    )
