"""Analytic test fields with closed-form derivatives.

Each :class:`TestFunction` evaluates value, gradient, Laplacian and (for
``D > 1``) Hessian.  Inputs are arrays of shape (M,) in 1D or (M, D).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import InvalidInput

__all__ = ["TestFunction", "get_function", "FUNCTIONS"]

CAMEL_K = 0.2
RASTRIGIN_A = 10.0


@dataclass(frozen=True)
class TestFunction:
    """A named scalar field on ``[0, 1]^D`` (``log`` lives on ``[0.1, 1]``)."""

    __test__ = False  # not a pytest class despite the name

    name: str
    dim: int
    value: Callable
    grad: Callable
    hessian: Callable
    domain: tuple = (0.0, 1.0)

    def laplacian(self, x):
        h = self.hessian(x)
        return h if self.dim == 1 else np.trace(h, axis1=-2, axis2=-1)

    def __call__(self, x):
        return self.value(x)


def _x1(x):
    return np.asarray(x, dtype=float)


def _camel_terms(x, k):
    # sum of two Gaussian bumps centered at 1/3 and 2/3 in every coordinate
    x = np.asarray(x, dtype=float)
    out = []
    for m in (1.0 / 3.0, 2.0 / 3.0):
        r = x - m
        g = np.exp(-np.sum(r * r, axis=-1) / k ** 2) if x.ndim > 1 else np.exp(-r * r / k ** 2)
        out.append((r, g))
    return out


def _camel(dim, k=CAMEL_K):
    pref = 1.0 / (2.0 * (k * np.sqrt(np.pi)) ** dim)

    def value(x):
        x = _prep(x, dim)
        return pref * sum(g for _, g in _camel_terms(x, k))

    def grad(x):
        x = _prep(x, dim)
        terms = _camel_terms(x, k)
        if dim == 1:
            return pref * sum(-2.0 * r / k ** 2 * g for r, g in terms)
        return pref * sum(-2.0 * r / k ** 2 * g[:, None] for r, g in terms)

    def hessian(x):
        x = _prep(x, dim)
        terms = _camel_terms(x, k)
        if dim == 1:
            return pref * sum((4.0 * r * r / k ** 4 - 2.0 / k ** 2) * g for r, g in terms)
        eye = np.eye(dim)
        return pref * sum(
            (4.0 * r[:, :, None] * r[:, None, :] / k ** 4 - 2.0 * eye / k ** 2) * g[:, None, None]
            for r, g in terms)

    return TestFunction(f"camel{dim}d", dim, value, grad, hessian)


def _prep(x, dim):
    x = np.asarray(x, dtype=float)
    if dim == 1:
        return x.reshape(-1) if x.ndim > 1 else x
    if x.ndim == 1:
        x = x.reshape(1, -1)
    if x.shape[-1] != dim:
        raise InvalidInput(f"expected points with {dim} coordinates")
    return x


def _rastrigin(A=RASTRIGIN_A):
    tp = 2.0 * np.pi
    return TestFunction(
        "rastrigin1d", 1,
        lambda x: _x1(x) ** 2 - A * np.cos(tp * _x1(x)) + A,
        lambda x: 2.0 * _x1(x) + A * tp * np.sin(tp * _x1(x)),
        lambda x: 2.0 + A * tp ** 2 * np.cos(tp * _x1(x)))


FUNCTIONS = {
    "camel1d": _camel(1),
    "camel2d": _camel(2),
    "rastrigin1d": _rastrigin(),
    "sin": TestFunction("sin", 1, lambda x: np.sin(_x1(x)), lambda x: np.cos(_x1(x)),
                        lambda x: -np.sin(_x1(x))),
    "square": TestFunction("square", 1, lambda x: _x1(x) ** 2, lambda x: 2.0 * _x1(x),
                           lambda x: np.full_like(_x1(x), 2.0)),
    "log": TestFunction("log", 1, lambda x: np.log(_x1(x)), lambda x: 1.0 / _x1(x),
                        lambda x: -1.0 / _x1(x) ** 2, domain=(0.1, 1.0)),
}


def get_function(name: str) -> TestFunction:
    try:
        return FUNCTIONS[name]
    except KeyError:
        raise InvalidInput(f"unknown test function {name!r}; choose from "
                           f"{', '.join(sorted(FUNCTIONS))}") from None
