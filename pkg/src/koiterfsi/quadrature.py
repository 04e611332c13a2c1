"""Gauss-Legendre rules on intervals and rectangles."""
from __future__ import annotations

from functools import lru_cache

import numpy as np


def points_for_order(order: int) -> int:
    """Number of Gauss points integrating polynomials of degree ``order`` exactly."""
    return max(1, order // 2 + 1)


@lru_cache(maxsize=64)
def _unit_rule(n: int) -> tuple[np.ndarray, np.ndarray]:
    x, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (x + 1.0), 0.5 * w


def gauss_unit(n: int) -> tuple[np.ndarray, np.ndarray]:
    """``n``-point rule on [0, 1] (copies, safe to modify)."""
    x, w = _unit_rule(n)
    return x.copy(), w.copy()


def composite(breaks: np.ndarray, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Composite rule with ``n`` points on every interval between ``breaks``."""
    breaks = np.asarray(breaks, dtype=float)
    x, w = _unit_rule(n)
    h = np.diff(breaks)
    nodes = breaks[:-1, None] + h[:, None] * x[None, :]
    weights = h[:, None] * w[None, :]
    return nodes.ravel(), weights.ravel()


def composite_box(xbreaks, ybreaks, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Tensor composite rule on a rectangle; returns points (N, 2) and weights (N,)."""
    xq, wx = composite(xbreaks, n)
    yq, wy = composite(ybreaks, n)
    X, Y = np.meshgrid(xq, yq, indexing="ij")
    W = np.outer(wx, wy)
    return np.column_stack([X.ravel(), Y.ravel()]), W.ravel()
