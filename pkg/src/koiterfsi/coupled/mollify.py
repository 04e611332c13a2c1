"""Regularization of the displacement and of the transport velocity.

The displacement is smoothed by a kernel that looks only into the past, so
the smoothed field at ``t = 0`` sees nothing but the initial displacement,
and then lifted by ``sqrt(eps)`` so the regularized domain contains the
original one.  Beyond the clamped ends the shell field is continued by even
reflection.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.integrate import trapezoid

from ..errors import AdmissibilityError, ParameterError
from ..geometry import ReferenceGeometry
from ..quadrature import gauss_unit

EPS_CAP = 0.1


def bump(z) -> np.ndarray:
    """Standard ``exp(-1 / (1 - z^2))`` bump on (-1, 1)."""
    z = np.asarray(z, dtype=float)
    out = np.zeros_like(z)
    inside = np.abs(z) < 1.0
    out[inside] = np.exp(-1.0 / (1.0 - z[inside] ** 2))
    return out


def kernel_rule(n: int, one_sided: bool = False) -> tuple[np.ndarray, np.ndarray]:
    """Nodes and normalized weights of the bump kernel on (-1, 1), or on (0, 1) if one-sided."""
    t, w = gauss_unit(n)
    if one_sided:
        wk = w * bump(2.0 * t - 1.0)
        return t, wk / wk.sum()
    z = 2.0 * t - 1.0
    wk = w * bump(z)
    return z, wk / wk.sum()


@dataclass
class ShellTrajectory:
    """Shell coefficients at time nodes, linear in between and constant outside."""

    times: np.ndarray
    coeffs: np.ndarray
    basis: object

    @classmethod
    def constant(cls, basis, coeffs, times) -> "ShellTrajectory":
        times = np.asarray(times, dtype=float)
        return cls(times, np.tile(np.asarray(coeffs, dtype=float), (times.size, 1)), basis)

    def at(self, t) -> np.ndarray:
        t = np.atleast_1d(np.asarray(t, dtype=float))
        tc = np.clip(t, self.times[0], self.times[-1])
        out = np.empty((t.size, self.coeffs.shape[1]))
        for j in range(self.coeffs.shape[1]):
            out[:, j] = np.interp(tc, self.times, self.coeffs[:, j])
        return out

    def relaxed(self, other: "ShellTrajectory", omega: float) -> "ShellTrajectory":
        return ShellTrajectory(self.times, (1.0 - omega) * self.coeffs + omega * other.coeffs, self.basis)

    def sup_distance(self, other: "ShellTrajectory", values: np.ndarray) -> float:
        n = min(len(self.times), len(other.times))
        diff = (self.coeffs[:n] - other.coeffs[:n]) @ values.T
        return float(np.max(np.abs(diff))) if diff.size else 0.0

    def truncated(self, n_nodes: int) -> "ShellTrajectory":
        return ShellTrajectory(self.times[:n_nodes], self.coeffs[:n_nodes], self.basis)


def reflect(q, length: float) -> np.ndarray:
    q = np.asarray(q, dtype=float)
    q = np.where(q < 0.0, -q, q)
    return np.where(q > length, 2.0 * length - q, q)


class MollifiedDisplacement:
    """``R_eps delta``: one-sided space-time smoothing plus the ``sqrt(eps)`` lift."""

    def __init__(self, delta: ShellTrajectory, eps: float, geom: ReferenceGeometry, n_points: int = 8,
                 eps0: float | None = None):
        if not eps > 0 or (eps0 is not None and eps > eps0 * (1 + 1e-12)):
            bound = "" if eps0 is None else f" (eps0 = {eps0:.6g})"
            raise ParameterError(f"regularization parameter {eps} is outside (0, eps0]{bound}")
        self.delta, self.eps, self.geom = delta, eps, geom
        self.tau, self.wt = kernel_rule(n_points, one_sided=True)
        self.z, self.wz = kernel_rule(n_points)
        self.shift = np.sqrt(eps)

    def _space_matrix(self, q) -> np.ndarray:
        q = np.asarray(q, dtype=float).ravel()
        qs = reflect(q[:, None] - self.eps * self.z[None, :], self.geom.length)
        Y = self.delta.basis.eval(qs.ravel()).reshape(q.size, self.z.size, -1)
        return np.einsum("mzk,z->mk", Y, self.wz)

    def time_average(self, t: float) -> np.ndarray:
        return self.wt @ self.delta.at(t - self.eps * self.tau)

    def eval(self, t: float, q) -> np.ndarray:
        q = np.asarray(q, dtype=float)
        return (self._space_matrix(q) @ self.time_average(t)).reshape(q.shape) + self.shift

    def on_nodes(self, times, q) -> np.ndarray:
        """Values at every time in ``times`` (rows) and point in ``q`` (columns)."""
        S = self._space_matrix(q)
        C = np.stack([self.time_average(t) for t in np.atleast_1d(times)])
        return C @ S.T + self.shift

    def check(self, values: np.ndarray) -> None:
        geom = self.geom
        lo, hi = float(np.min(values)), float(np.max(values))
        if max(abs(lo), abs(hi)) >= 0.5 * (geom.alpha + geom.kappa):
            raise AdmissibilityError(f"regularized displacement reaches {max(abs(lo), abs(hi)):.4g}, "
                                     f"not below (alpha + kappa)/2 = {0.5 * (geom.alpha + geom.kappa):.4g}")
        if 1.0 + lo * geom.cutoff.max_slope / geom.kappa <= 0.0:
            raise AdmissibilityError(f"regularized displacement {lo:.4g} folds the normal fibers")


def mollify_displacement(delta: ShellTrajectory, eps: float, geom: ReferenceGeometry,
                         n_points: int = 8, eps0: float | None = None) -> MollifiedDisplacement:
    return MollifiedDisplacement(delta, eps, geom, n_points, eps0)


def epsilon_one(geom: ReferenceGeometry, basis, eta0, cap: float = EPS_CAP, n_points: int = 8,
                q=None) -> float:
    """Largest ``eps <= cap`` (up to bisection accuracy) with ``R_eps eta0 > eta0`` pointwise."""
    q = np.linspace(0.0, geom.length, 401) if q is None else q
    traj = ShellTrajectory.constant(basis, eta0, [0.0, 1.0])
    base = basis.eval(q) @ np.asarray(eta0, dtype=float)

    def ok(e):
        return bool(np.min(MollifiedDisplacement(traj, e, geom, n_points).eval(0.0, q) - base) > 0.0)

    if ok(cap):
        return cap
    lo, hi = cap * 1e-10, cap
    if not ok(lo):
        raise ParameterError("no regularization parameter keeps the regularized initial domain above eta0")
    for _ in range(60):
        mid = np.sqrt(lo * hi)
        lo, hi = (mid, hi) if ok(mid) else (lo, mid)
    return lo


def epsilon_zero(geom: ReferenceGeometry, basis, eta0, n_points: int = 8) -> float:
    """Admissible upper bound for the regularization parameter.

    The ``sqrt(eps)`` lift stays below ``(kappa - alpha)/2`` so that every
    displacement bounded by alpha remains below ``(alpha + kappa)/2`` after
    regularization.
    """
    uniform = 0.999 * (0.5 * (geom.kappa - geom.alpha)) ** 2
    cap = min(EPS_CAP, uniform)
    return epsilon_one(geom, basis, eta0, cap, n_points)


class VelocityHistory:
    """Physical velocity on a background grid at the time nodes (zero outside the fluid)."""

    def __init__(self, xs, ys, times, values):
        self.xs, self.ys = np.asarray(xs, dtype=float), np.asarray(ys, dtype=float)
        self.times = np.asarray(times, dtype=float)
        self.values = np.asarray(values, dtype=float)

    @classmethod
    def zeros(cls, geom: ReferenceGeometry, spacing: float, times) -> "VelocityHistory":
        nx = int(np.ceil(geom.length / spacing)) + 1
        top = geom.height + 0.5 * (geom.alpha + geom.kappa)
        ny = int(np.ceil(top / spacing)) + 1
        xs, ys = np.linspace(0.0, geom.length, nx), np.linspace(0.0, top, ny)
        return cls(xs, ys, times, np.zeros((len(times), ny, nx, 2)))

    def like(self, values) -> "VelocityHistory":
        return VelocityHistory(self.xs, self.ys, self.times[:len(values)], values)

    @property
    def points(self) -> np.ndarray:
        X, Y = np.meshgrid(self.xs, self.ys, indexing="xy")
        return np.stack([X, Y], axis=-1)

    def relaxed(self, other: "VelocityHistory", omega: float) -> "VelocityHistory":
        n = min(len(self.times), len(other.times))
        return self.like((1.0 - omega) * self.values[:n] + omega * other.values[:n])

    def l2_distance(self, other: "VelocityHistory") -> float:
        """Space-time L2 distance by the trapezoidal rule on the grid and the time nodes."""
        n = min(len(self.times), len(other.times))
        d = ((self.values[:n] - other.values[:n]) ** 2).sum(axis=-1)
        val = trapezoid(trapezoid(trapezoid(d, self.xs, axis=2), self.ys, axis=1), self.times[:n]) \
            if n > 1 else float(trapezoid(trapezoid(d[0], self.xs, axis=1), self.ys))
        return float(np.sqrt(max(val, 0.0)))

    def __call__(self, t: float, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        flat = x.reshape(-1, 2)
        out = np.zeros_like(flat)
        T0, T1 = self.times[0], self.times[-1]
        if t < T0 or t > T1 or len(self.times) < 2:
            return out.reshape(x.shape)
        k = int(np.clip(np.searchsorted(self.times, t, side="right") - 1, 0, len(self.times) - 2))
        lam = (t - self.times[k]) / (self.times[k + 1] - self.times[k])
        frame = (1.0 - lam) * self.values[k] + lam * self.values[k + 1]
        xs, ys = self.xs, self.ys
        inside = (flat[:, 0] >= xs[0]) & (flat[:, 0] <= xs[-1]) & (flat[:, 1] >= ys[0]) & (flat[:, 1] <= ys[-1])
        p = flat[inside]
        ix = np.clip(np.searchsorted(xs, p[:, 0], side="right") - 1, 0, xs.size - 2)
        iy = np.clip(np.searchsorted(ys, p[:, 1], side="right") - 1, 0, ys.size - 2)
        a = ((p[:, 0] - xs[ix]) / (xs[ix + 1] - xs[ix]))[:, None]
        b = ((p[:, 1] - ys[iy]) / (ys[iy + 1] - ys[iy]))[:, None]
        out[inside] = ((1 - a) * (1 - b) * frame[iy, ix] + a * (1 - b) * frame[iy, ix + 1]
                       + (1 - a) * b * frame[iy + 1, ix] + a * b * frame[iy + 1, ix + 1])
        return out.reshape(x.shape)


def mollify_velocity(v, eps: float, t: float, x, n_points: int = 6) -> np.ndarray:
    """``(w_eps * v)(t, x)`` for a space-time field ``v(t, points)`` with a product bump kernel."""
    if not eps > 0:
        raise ParameterError("the velocity regularization needs eps > 0")
    x = np.asarray(x, dtype=float)
    flat = x.reshape(-1, 2)
    z, w = kernel_rule(n_points)
    Z1, Z2 = np.meshgrid(z, z, indexing="ij")
    W2 = np.outer(w, w).ravel()
    shifts = eps * np.column_stack([Z1.ravel(), Z2.ravel()])
    pts = (flat[None, :, :] - shifts[:, None, :]).reshape(-1, 2)
    out = np.zeros_like(flat)
    for tau, wt in zip(z, w):
        vals = np.asarray(v(t - eps * tau, pts), dtype=float).reshape(shifts.shape[0], flat.shape[0], 2)
        out += wt * np.einsum("s,snc->nc", W2, vals)
    return out.reshape(x.shape)
