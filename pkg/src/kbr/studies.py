"""Convergence, noise and benchmark-table drivers.

Every driver returns plain lists of dict rows so the CLI can write them as
CSV without further processing.
"""

from __future__ import annotations

import numpy as np

from .baselines.fd import fd_derivatives
from .baselines.spline import smoothing_spline, spline_budget
from .derivatives import explicit_field, implicit_field
from .errors import InvalidInput
from .functions import TestFunction, get_function
from .kernel import TrainingSet
from .metrics import loglog_slope, mse, rmse
from .training import NoiseConfig, SweepConfig, add_noise, fit_theta

__all__ = [
    "SCHEMES",
    "sample_points",
    "derivative_errors",
    "convergence_study",
    "noise_study",
    "dnn_table",
    "DNN_REFERENCE",
]

SCHEMES = ("explicit", "implicit", "fd", "spline")

# gradient MSE of the differential-neural-network reference (quoted, not recomputed)
DNN_REFERENCE = {"sin": 7.5e-6, "square": 1.1e-3, "log": 3.6e-6}


def sample_points(n: int, rng, domain=(0.0, 1.0), dim: int = 1) -> np.ndarray:
    """``n`` sorted uniform samples (1D) or an (n, dim) array."""
    a, b = domain
    if dim == 1:
        return np.sort(rng.uniform(a, b, n))
    return rng.uniform(a, b, (n, dim))


def _estimate(scheme, x, y, xq, sweep, noise_s=0.0):
    if scheme in ("explicit", "implicit"):
        model = fit_theta(TrainingSet(x, y), sweep)
        if scheme == "explicit":
            out = explicit_field(model, xq)
        else:
            out = implicit_field(model, xq, strict=False)
        return out.grad, out.lap
    if scheme == "fd":
        return fd_derivatives(x, y, xq)
    if scheme == "spline":
        spl = smoothing_spline(x, y, spline_budget(x.size, noise_s), normalize=True)
        return spl.grad(xq), spl.lap(xq)
    raise InvalidInput(f"unknown scheme {scheme!r}; choose from {', '.join(SCHEMES)}")


def derivative_errors(fn: TestFunction, x, y, xq, scheme, sweep=SweepConfig(), noise_s=0.0):
    """RMSE of gradient and Laplacian at the query points inside the data hull.

    Returns ``(rmse_grad, rmse_lap, n_skipped)`` where ``n_skipped`` counts
    query points at which the implicit system stayed ill-conditioned; those
    points are left out of both averages.
    """
    xq = xq[(xq > x.min()) & (xq < x.max())]
    g, l = _estimate(scheme, x, y, xq, sweep, noise_s)
    ok = np.isfinite(g) & np.isfinite(l)
    if not ok.any():
        raise InvalidInput("no query point produced a finite derivative")
    xq = xq[ok]
    return rmse(g[ok], fn.grad(xq)), rmse(l[ok], fn.laplacian(xq)), int((~ok).sum())


def convergence_study(fn, Ns, scheme: str = "explicit", seed: int = 0, n_test: int = 5000,
                      sweep: SweepConfig | None = None):
    """Derivative RMSE against the number of random training points.

    Training points are drawn afresh for each ``N``; the test set of
    ``n_test`` random points is drawn once and shared.  Returns the rows
    and the fitted log-log slopes ``(grad, lap)`` (None if undefined).
    """
    fn = get_function(fn) if isinstance(fn, str) else fn
    Ns = [int(n) for n in Ns]
    if any(b <= a for a, b in zip(Ns, Ns[1:])):
        raise InvalidInput("Ns must be strictly increasing")
    rng = np.random.default_rng(seed)
    xq = sample_points(n_test, rng, fn.domain)
    sweep = sweep or SweepConfig(seed=seed)
    rows = []
    for n in Ns:
        x = sample_points(n, rng, fn.domain)
        y = fn.value(x)
        eg, el, skipped = derivative_errors(fn, x, y, xq, scheme, sweep)
        rows.append({"N": n, "scheme": scheme, "rmse_grad": eg, "rmse_lap": el,
                     "n_skipped": skipped})
    slopes = []
    for key in ("rmse_grad", "rmse_lap"):
        vals = [r[key] for r in rows]
        try:
            slopes.append(loglog_slope(Ns, vals) if max(vals) > 1e-12 else None)
        except Exception:
            slopes.append(None)
    return rows, tuple(slopes)


def noise_study(fn, N: int, noise_levels, schemes=("explicit", "implicit", "spline"),
                seed: int = 0, n_test: int = 5000, sweep: SweepConfig | None = None):
    """Derivative RMSE for multiplicatively corrupted training data.

    One set of training locations and one test set are drawn per seed; each
    noise level corrupts the same clean values with its own stream.
    """
    fn = get_function(fn) if isinstance(fn, str) else fn
    rng = np.random.default_rng(seed)
    xq = sample_points(n_test, rng, fn.domain)
    x = sample_points(N, rng, fn.domain)
    clean = fn.value(x)
    sweep = sweep or SweepConfig(seed=seed)
    rows = []
    for j, s in enumerate(noise_levels):
        y = add_noise(clean, NoiseConfig(s=float(s), seed=seed * 1000 + j))
        for scheme in schemes:
            eg, el, skipped = derivative_errors(fn, x, y, xq, scheme, sweep, noise_s=float(s))
            rows.append({"s": float(s), "scheme": scheme, "rmse_grad": eg, "rmse_lap": el,
                         "n_skipped": skipped})
    return rows


def dnn_table(n: int = 1001, n_test: int = 1000, seed: int = 0, sweep: SweepConfig | None = None):
    """Non-normalized MSE of KBR derivatives on the benchmark fields.

    Data are ``n`` uniform nodes on the field's domain ([0.1, 1] for log,
    [0, 1] otherwise) with exact values; derivatives are evaluated at
    ``n_test`` random deployment points strictly between the second and
    second-to-last node.
    """
    rng = np.random.default_rng(seed)
    sweep = sweep or SweepConfig(seed=seed)
    rows = []
    for name in ("sin", "square", "log"):
        fn = get_function(name)
        x = np.linspace(*fn.domain, n)
        model = fit_theta(TrainingSet(x, fn.value(x)), sweep)
        xq = rng.uniform(x[1], x[-2], n_test)
        ex = explicit_field(model, xq)
        im = implicit_field(model, xq)
        g, l = fn.grad(xq), fn.laplacian(xq)
        rows.append({
            "function": name,
            "dnn_mse_grad": DNN_REFERENCE[name],
            "implicit_mse_grad": mse(im.grad, g), "implicit_mse_lap": mse(im.lap, l),
            "explicit_mse_grad": mse(ex.grad, g), "explicit_mse_lap": mse(ex.lap, l),
            "k": model.k,
        })
    return rows
