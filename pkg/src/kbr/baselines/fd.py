"""Finite-difference weights on arbitrary nodes and a nearest-node FD baseline."""

from __future__ import annotations

from dataclasses import dataclass
from math import factorial

import numpy as np
from scipy.spatial import cKDTree

from ..errors import InvalidInput, SingularStencil

__all__ = ["FDStencil", "fd_weights", "fd_derivatives"]


@dataclass(frozen=True)
class FDStencil:
    """Nodes relative to ``x0`` with first- and second-derivative weights."""

    nodes: np.ndarray
    weights_d1: np.ndarray
    weights_d2: np.ndarray

    def apply(self, values):
        values = np.asarray(values, dtype=float)
        return float(self.weights_d1 @ values), float(self.weights_d2 @ values)


def _vandermonde_weights(h, order):
    """Weights w with sum_j w_j h_j^p / p! = delta_{p, order} for p < len(h)."""
    n = h.size
    p = np.arange(n)
    V = h[None, :] ** p[:, None] / np.array([factorial(int(q)) for q in p])[:, None]
    rhs = np.zeros(n)
    rhs[order] = 1.0
    try:
        w = np.linalg.solve(V, rhs)
    except np.linalg.LinAlgError:
        raise SingularStencil("nodes do not determine a unique stencil") from None
    if not np.all(np.isfinite(w)):
        raise SingularStencil("stencil weights are not finite")
    return w


def fd_weights(nodes, x0: float, order: int = 1) -> FDStencil:
    """Polynomial-exact FD weights at ``x0`` from the given nodes.

    Both first- and second-derivative weights are returned; ``order`` is the
    derivative that must be available, so at least ``order + 1`` nodes are
    needed.  The second-derivative weights are zero when the stencil is too
    small to carry them.
    """
    nodes = np.asarray(nodes, dtype=float).reshape(-1)
    if order not in (1, 2):
        raise InvalidInput("order must be 1 or 2")
    if nodes.size < order + 1:
        raise InvalidInput(f"need at least {order + 1} nodes for derivative order {order}")
    if np.unique(nodes).size != nodes.size:
        raise SingularStencil("repeated nodes")
    h = nodes - float(x0)
    # scale offsets to O(1) so the Vandermonde system stays well conditioned
    s = np.max(np.abs(h))
    if s == 0:
        raise SingularStencil("all nodes coincide with x0")
    w1 = _vandermonde_weights(h / s, 1) / s
    w2 = _vandermonde_weights(h / s, 2) / s ** 2 if nodes.size >= 3 else np.zeros_like(h)
    return FDStencil(h, w1, w2)


def fd_derivatives(x_train, y_train, x_query, n_nodes: int = 3):
    """Second-order non-uniform FD estimates at arbitrary query points.

    The stencil is formed from the ``n_nodes`` training points nearest to
    each query point.  Returns ``(grad, lap)`` arrays.
    """
    xt = np.asarray(x_train, dtype=float).reshape(-1)
    yt = np.asarray(y_train, dtype=float).reshape(-1)
    xq = np.atleast_1d(np.asarray(x_query, dtype=float))
    if xt.size < n_nodes:
        raise InvalidInput(f"need at least {n_nodes} training points")
    _, nb = cKDTree(xt[:, None]).query(xq[:, None], k=n_nodes)
    h = xt[nb] - xq[:, None]
    s = np.max(np.abs(h), axis=1, keepdims=True)
    s = np.where(s == 0, 1.0, s)
    u = h / s
    p = np.arange(n_nodes)
    fact = np.array([factorial(int(q)) for q in p], dtype=float)
    V = u[:, None, :] ** p[None, :, None] / fact[None, :, None]
    rhs = np.zeros((xq.size, n_nodes, 2))
    rhs[:, 1, 0] = 1.0
    rhs[:, 2, 1] = 1.0
    W = np.linalg.solve(V, rhs)
    vals = yt[nb]
    grad = np.einsum("mk,mk->m", W[:, :, 0], vals) / s[:, 0]
    lap = np.einsum("mk,mk->m", W[:, :, 1], vals) / s[:, 0] ** 2
    return grad, lap
