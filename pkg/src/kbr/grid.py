"""One-dimensional node grids with midpoint interfaces."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidInput

__all__ = ["Grid1D", "uniform_grid", "clustered_grid"]


@dataclass(frozen=True)
class Grid1D:
    """Strictly increasing nodes; interfaces are the midpoints between them.

    The control volume of node ``i`` spans the neighboring interfaces, with
    half cells at the two ends of the domain.
    """

    nodes: np.ndarray
    kind: str = "nonuniform"

    def __post_init__(self):
        x = np.asarray(self.nodes, dtype=float).reshape(-1)
        if x.size < 3:
            raise InvalidInput("a grid needs at least 3 nodes")
        if not np.all(np.isfinite(x)) or np.any(np.diff(x) <= 0):
            raise InvalidInput("grid nodes must be finite and strictly increasing")
        object.__setattr__(self, "nodes", x)

    @property
    def n(self) -> int:
        return self.nodes.size

    @property
    def interfaces(self) -> np.ndarray:
        return 0.5 * (self.nodes[1:] + self.nodes[:-1])

    @property
    def faces(self) -> np.ndarray:
        """Control-volume boundaries including the two domain ends (N + 1 values)."""
        x = self.nodes
        return np.concatenate([[x[0]], self.interfaces, [x[-1]]])

    @property
    def cell_widths(self) -> np.ndarray:
        return np.diff(self.faces)

    @property
    def spacing(self) -> np.ndarray:
        return np.diff(self.nodes)

    @property
    def min_spacing(self) -> float:
        return float(np.min(self.spacing))


def uniform_grid(n: int, a: float = 0.0, b: float = 1.0) -> Grid1D:
    return Grid1D(np.linspace(a, b, n), kind="uniform")


def clustered_grid(n: int = 251, ratio: float = 3.0, a: float = 0.0, b: float = 1.0) -> Grid1D:
    """Smoothly clustered nodes, finest at the center, max/min spacing ~ ``ratio``.

    ``z = tan(beta xi) / tan(beta)`` on uniform ``xi`` in [-1, 1] has local
    spacing proportional to ``sec^2(beta xi)``, so ``tan(beta)^2 = ratio - 1``
    sets the spacing ratio between the ends and the center.
    """
    if ratio < 1:
        raise InvalidInput("ratio must be >= 1")
    if ratio == 1:
        return Grid1D(np.linspace(a, b, n), kind="uniform")
    beta = np.arctan(np.sqrt(ratio - 1.0))
    xi = np.linspace(-1.0, 1.0, n)
    z = np.tan(beta * xi) / np.tan(beta)
    x = a + (b - a) * 0.5 * (z + 1.0)
    x[0], x[-1] = a, b
    return Grid1D(x, kind="nonuniform")
