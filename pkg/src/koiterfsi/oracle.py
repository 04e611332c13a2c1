"""Brute-force verifiers.

Nothing here imports the assembly, geometry or solver modules; the functions
only rely on numpy/scipy so they give an independent second opinion.
"""
from __future__ import annotations

from typing import Callable

import numpy as np
from scipy.optimize import brentq


def fd_jacobian(fmap: Callable[[np.ndarray], np.ndarray], x, h: float = 1e-6) -> np.ndarray:
    """Central-difference Jacobian of ``fmap`` at a single point ``x``."""
    x = np.asarray(x, dtype=float)
    cols = []
    for i in range(x.size):
        e = np.zeros_like(x)
        e.flat[i] = h
        cols.append((np.asarray(fmap(x + e)) - np.asarray(fmap(x - e))) / (2.0 * h))
    return np.stack(cols, axis=-1)


def quad_integral(f: Callable, region, order: int, n_sub: int = 1) -> float:
    """Tensor Gauss quadrature exact to polynomial degree ``order``.

    ``region`` is ``(a, b)`` for an interval or ``(a, b, c, d)`` for the set
    ``a < x < b, c(x) < y < d(x)`` where ``c`` and ``d`` may be numbers or
    callables of ``x``.  ``f`` takes an array of points (N,) or (N, 2).
    """
    n = order // 2 + 1
    t, w = np.polynomial.legendre.leggauss(n)
    t, w = 0.5 * (t + 1.0), 0.5 * w
    a, b = region[0], region[1]
    edges = np.linspace(a, b, n_sub + 1)
    xs = (edges[:-1, None] + np.diff(edges)[:, None] * t).ravel()
    wx = (np.diff(edges)[:, None] * w).ravel()
    if len(region) == 2:
        return float(np.sum(np.asarray(f(xs)) * wx))
    lo = region[2](xs) if callable(region[2]) else np.full_like(xs, region[2])
    hi = region[3](xs) if callable(region[3]) else np.full_like(xs, region[3])
    total = 0.0
    for k in range(n_sub):
        ys = lo[:, None] + (hi - lo)[:, None] * ((k + t[None, :]) / n_sub)
        wy = (hi - lo)[:, None] * w[None, :] / n_sub
        pts = np.column_stack([np.repeat(xs, n), ys.ravel()])
        total += float(np.sum(np.asarray(f(pts)).reshape(xs.size, n) * wy * wx[:, None]))
    return total


def fd_energy_gradient(energy: Callable, eta, zeta, h: float = 1e-5) -> float:
    """Centered directional derivative of a scalar functional of coefficient vectors."""
    eta, zeta = np.asarray(eta, dtype=float), np.asarray(zeta, dtype=float)
    return (energy(eta + h * zeta) - energy(eta - h * zeta)) / (2.0 * h)


def oscillator_reference(mass: float, stiffness: float, eta0: float, eta1: float, t,
                         inertia: float = 2.0) -> tuple[np.ndarray, np.ndarray]:
    """Exact solution of ``inertia * mass * y'' + stiffness * y = 0``.

    ``inertia`` is the shell factor ``2 rho_s eps_s``; returns displacement and velocity.
    """
    omega = np.sqrt(stiffness / (inertia * mass))
    t = np.asarray(t, dtype=float)
    y = eta0 * np.cos(omega * t) + eta1 / omega * np.sin(omega * t)
    v = -eta0 * omega * np.sin(omega * t) + eta1 * np.cos(omega * t)
    return y, v


def first_zero_crossing(fn: Callable[[float], float], t_max: float, n_scan: int = 2000) -> float:
    """First sign change of ``fn`` on (0, t_max], refined by bracketing."""
    ts = np.linspace(0.0, t_max, n_scan + 1)
    vals = np.array([fn(t) for t in ts])
    idx = np.flatnonzero(np.sign(vals[1:]) != np.sign(vals[:-1]))
    if idx.size == 0:
        raise ValueError("no sign change on the scanned interval")
    i = idx[0]
    return brentq(fn, ts[i], ts[i + 1], xtol=1e-14)
