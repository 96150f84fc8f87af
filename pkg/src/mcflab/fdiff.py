"""Finite-difference derivatives on uniform and graded grids.

Stencil weights come from Fornberg's recurrence, so the same code path
serves 4th-order centred differences on uniform grids and the 3/5-point
stencils on log-graded grids. Boundary nodes fall back to one-sided
stencils of the same width (lower effective order).
"""

from __future__ import annotations

import numpy as np


def fornberg_weights(x0: float, x: np.ndarray, m: int) -> np.ndarray:
    """Weights w[k, j] so that f^(k)(x0) ~= sum_j w[k, j] f(x[j]), k = 0..m."""
    x = np.asarray(x, dtype=float)
    npts = len(x)
    if npts <= m:
        raise ValueError(f"need more than {m} nodes for derivative order {m}")
    c = np.zeros((m + 1, npts))
    c[0, 0] = 1.0
    c1 = 1.0
    c4 = x[0] - x0
    for i in range(1, npts):
        mn = min(i, m)
        c2 = 1.0
        c5 = c4
        c4 = x[i] - x0
        for j in range(i):
            c3 = x[i] - x[j]
            c2 *= c3
            if j == i - 1:
                for k in range(mn, 0, -1):
                    c[k, i] = c1 * (k * c[k - 1, i - 1] - c5 * c[k, i - 1]) / c2
                c[0, i] = -c1 * c5 * c[0, i - 1] / c2
            for k in range(mn, 0, -1):
                c[k, j] = (c4 * c[k, j] - k * c[k - 1, j]) / c3
            c[0, j] = c4 * c[0, j] / c3
        c1 = c2
    return c


class DerivOperator:
    """Cached banded differentiation for a fixed grid.

    npts-wide Fornberg stencils per node; centred in the interior,
    one-sided near the edges.
    """

    def __init__(self, nodes: np.ndarray, npts: int = 5, max_order: int = 2):
        nodes = np.asarray(nodes, dtype=float)
        if np.any(np.diff(nodes) <= 0):
            raise ValueError("nodes must be strictly increasing")
        n = len(nodes)
        npts = min(npts, n)
        if npts <= max_order:
            raise ValueError("stencil too narrow for requested order")
        half = npts // 2
        self.nodes = nodes
        self.npts = npts
        self._starts = np.clip(np.arange(n) - half, 0, n - npts)
        self._w = np.empty((n, max_order + 1, npts))
        for i in range(n):
            s = self._starts[i]
            self._w[i] = fornberg_weights(nodes[i], nodes[s:s + npts], max_order)

    def apply(self, values: np.ndarray, order: int) -> np.ndarray:
        values = np.asarray(values, dtype=float)
        idx = self._starts[:, None] + np.arange(self.npts)[None, :]
        return np.einsum("ij,ij->i", self._w[:, order, :], values[idx])


def deriv(nodes: np.ndarray, values: np.ndarray, order: int, npts: int = 5) -> np.ndarray:
    """One-shot derivative of sampled values on an arbitrary increasing grid."""
    return DerivOperator(nodes, npts=npts, max_order=order).apply(values, order)


def tip_second_derivative_even(nodes: np.ndarray, values: np.ndarray) -> float:
    """f''(0) for an even profile sampled with nodes[0] == 0.

    Uses a 5-point stencil on the mirrored nodes (-r2, -r1, 0, r1, r2),
    which removes the one-sided bias at the symmetry axis.
    """
    nodes = np.asarray(nodes, dtype=float)
    values = np.asarray(values, dtype=float)
    if len(nodes) < 3:
        raise ValueError("need at least 3 nodes for the axis stencil")
    if nodes[0] != 0.0:
        raise ValueError("axis stencil requires nodes[0] == 0")
    r1, r2 = nodes[1], nodes[2]
    x = np.array([-r2, -r1, 0.0, r1, r2])
    f = np.array([values[2], values[1], values[0], values[1], values[2]])
    w = fornberg_weights(0.0, x, 2)
    return float(w[2] @ f)
