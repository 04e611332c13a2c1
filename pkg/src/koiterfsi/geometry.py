"""Reference geometry, tube coordinates, the Hanzawa transform and related maps.

The reference fluid domain is bounded in part by a shell curve ``M`` with a
unit normal ``nu`` pointing out of the fluid.  A point near ``M`` has tube
coordinates ``(q, s)`` with ``x = c(q) + s nu(q)``, where ``q`` is arclength.
A displacement ``eta`` on ``M`` deforms the domain through

    Psi(x) = x + eta(q(x)) * beta(s(x) / kappa) * nu(q(x)),

which moves points only inside the tube of half-width ``kappa``.

Displacements are passed around as *profiles*: any object with a method
``eval(q, der=0)`` returning the derivative of order ``der`` at ``q``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Protocol

import numpy as np

from .errors import AdmissibilityError, ConfigurationError, OutOfTubeError, ParameterError
from .quadrature import composite, composite_box, points_for_order


class ShellProfile(Protocol):
    def eval(self, q: np.ndarray, der: int = 0) -> np.ndarray: ...


class FunctionProfile:
    """Profile built from closed-form callables for the value and derivatives."""

    def __init__(self, f: Callable, df: Callable | None = None, d2f: Callable | None = None):
        self._fns = (f, df, d2f)

    def eval(self, q, der: int = 0):
        fn = self._fns[der]
        if fn is None:
            raise ConfigurationError(f"derivative of order {der} not provided for this profile")
        q = np.asarray(q, dtype=float)
        return np.broadcast_to(np.asarray(fn(q), dtype=float), q.shape).copy()


class ConstantProfile:
    def __init__(self, value: float):
        self.value = float(value)

    def eval(self, q, der: int = 0):
        q = np.asarray(q, dtype=float)
        return np.full(q.shape, self.value if der == 0 else 0.0)


ZERO_PROFILE = ConstantProfile(0.0)


# --------------------------------------------------------------------------
# cutoff
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class QuinticCutoff:
    """Monotone C^2 cutoff: 0 on [-1, lower], 1 on [upper, 0]."""

    lower: float = -0.9
    upper: float = -0.1

    @property
    def width(self) -> float:
        return self.upper - self.lower

    @property
    def max_slope(self) -> float:
        return 15.0 / 8.0 / self.width

    def __call__(self, s, der: int = 0):
        t = np.clip((np.asarray(s, dtype=float) - self.lower) / self.width, 0.0, 1.0)
        if der == 0:
            return t**3 * (10.0 - 15.0 * t + 6.0 * t**2)
        if der == 1:
            return 30.0 * t**2 * (1.0 - t) ** 2 / self.width
        if der == 2:
            return 60.0 * t * (1.0 - t) * (1.0 - 2.0 * t) / self.width**2
        raise ValueError("cutoff derivatives are available up to order 2")


# --------------------------------------------------------------------------
# shell curves
# --------------------------------------------------------------------------

def _perp(v: np.ndarray) -> np.ndarray:
    return np.stack([-v[..., 1], v[..., 0]], axis=-1)


class FlatEdge:
    """Horizontal shell ``{(q, height) : 0 <= q <= length}`` with normal (0, 1)."""

    orientation = 1.0

    def __init__(self, length: float, height: float = 1.0):
        self.length = float(length)
        self.height = float(height)
        self.injectivity_radius = self.height

    def point(self, q):
        q = np.asarray(q, dtype=float)
        return np.stack([q, np.full(q.shape, self.height)], axis=-1)

    def tangent(self, q):
        q = np.asarray(q, dtype=float)
        return np.stack([np.ones(q.shape), np.zeros(q.shape)], axis=-1)

    def normal(self, q):
        q = np.asarray(q, dtype=float)
        return np.stack([np.zeros(q.shape), np.ones(q.shape)], axis=-1)

    def normal_derivative(self, q):
        q = np.asarray(q, dtype=float)
        return np.zeros(q.shape + (2,))

    def weingarten(self, q):
        return np.zeros(np.shape(q))


class CircleArc:
    """Arc of a circle traversed counterclockwise, fluid on the inside.

    ``q`` is arclength from the angle ``theta0``; the normal points away from
    the centre.
    """

    orientation = -1.0

    def __init__(self, radius: float, theta0: float, theta1: float, center=(0.0, 0.0)):
        if not theta1 > theta0:
            raise ConfigurationError("arc needs theta1 > theta0")
        self.radius = float(radius)
        self.theta0 = float(theta0)
        self.center = np.asarray(center, dtype=float)
        self.length = self.radius * (theta1 - theta0)
        self.injectivity_radius = self.radius

    def _theta(self, q):
        return self.theta0 + np.asarray(q, dtype=float) / self.radius

    def point(self, q):
        th = self._theta(q)
        return self.center + self.radius * np.stack([np.cos(th), np.sin(th)], axis=-1)

    def tangent(self, q):
        th = self._theta(q)
        return np.stack([-np.sin(th), np.cos(th)], axis=-1)

    def normal(self, q):
        th = self._theta(q)
        return np.stack([np.cos(th), np.sin(th)], axis=-1)

    def normal_derivative(self, q):
        return self.tangent(q) / self.radius

    def weingarten(self, q):
        return np.full(np.shape(q), -1.0 / self.radius)

    def tube_coords_exact(self, x):
        d = np.asarray(x, dtype=float) - self.center
        r = np.hypot(d[..., 0], d[..., 1])
        th = np.arctan2(d[..., 1], d[..., 0])
        th = self.theta0 + np.mod(th - self.theta0 + np.pi, 2.0 * np.pi) - np.pi
        return self.radius * (th - self.theta0), r - self.radius


@dataclass(frozen=True)
class ReferenceGeometry:
    curve: FlatEdge | CircleArc
    kappa: float = 0.8
    alpha: float = 0.3
    cutoff: QuinticCutoff = field(default_factory=QuinticCutoff)

    def __post_init__(self):
        if not (0.0 < self.alpha < self.kappa):
            raise ParameterError(f"need 0 < alpha < kappa, got alpha={self.alpha}, kappa={self.kappa}")
        if not self.kappa < self.curve.injectivity_radius:
            raise ParameterError("kappa must be below the injectivity radius of the tube map")
        if self.alpha * self.cutoff.max_slope >= self.kappa:
            raise ParameterError(
                "alpha * max|beta'| must stay below kappa so that every admissible "
                "displacement gives a monotone fiber map"
            )

    # flat-channel conveniences
    @property
    def is_flat(self) -> bool:
        return isinstance(self.curve, FlatEdge)

    @property
    def length(self) -> float:
        return self.curve.length

    @property
    def height(self) -> float:
        if not self.is_flat:
            raise ConfigurationError("channel height is defined for the flat channel only")
        return self.curve.height

    # curvature data, all scalars in 2D with arclength parametrization
    def first_form(self, q):
        return np.ones(np.shape(q))

    def weingarten(self, q):
        return self.curve.weingarten(q)

    def second_form(self, q):
        return self.curve.weingarten(q)

    def k_contraction(self, q):
        w = self.curve.weingarten(q)
        return w * w

    def mean_curvature(self, q):
        return 0.5 * self.curve.weingarten(q)

    def gauss_curvature(self, q):
        return np.zeros(np.shape(q))

    def sample_q(self, n: int = 2049) -> np.ndarray:
        return np.linspace(0.0, self.length, n)

    def beta_hat(self, s, der: int = 0):
        """Cutoff as a function of the tube coordinate ``s`` (chain rule applied)."""
        return self.cutoff(np.asarray(s) / self.kappa, der) / self.kappa**der


def channel_geometry(length: float = 2.0, height: float = 1.0, kappa: float = 0.8,
                     alpha: float = 0.3) -> ReferenceGeometry:
    return ReferenceGeometry(FlatEdge(length, height), kappa=kappa, alpha=alpha)


def arc_geometry(radius: float = 1.0, theta0: float = 0.25 * np.pi, theta1: float = 0.75 * np.pi,
                 kappa: float = 0.5, alpha: float = 0.2) -> ReferenceGeometry:
    return ReferenceGeometry(CircleArc(radius, theta0, theta1), kappa=kappa, alpha=alpha)


# --------------------------------------------------------------------------
# admissibility
# --------------------------------------------------------------------------

def displacement_bounds(geom: ReferenceGeometry, eta: ShellProfile, q=None) -> tuple[float, float]:
    q = geom.sample_q() if q is None else q
    v = eta.eval(q)
    return float(v.min()), float(v.max())


def check_admissible(geom: ReferenceGeometry, eta: ShellProfile, q=None) -> None:
    """Raise if ``eta`` is too large for the tube or makes a fiber map non-monotone."""
    lo, hi = displacement_bounds(geom, eta, q)
    sup = max(abs(lo), abs(hi))
    if not np.isfinite(sup) or sup >= geom.kappa:
        raise AdmissibilityError(f"sup|eta| = {sup:.6g} is not below kappa = {geom.kappa}")
    if 1.0 + lo * geom.cutoff.max_slope / geom.kappa <= 0.0:
        raise AdmissibilityError(
            f"min eta = {lo:.6g} folds the normal fibers (needs > {-geom.kappa / geom.cutoff.max_slope:.6g})"
        )


# --------------------------------------------------------------------------
# tube coordinates
# --------------------------------------------------------------------------

def _tube_coords_raw(geom: ReferenceGeometry, x: np.ndarray, tol: float = 1e-14, maxit: int = 50):
    curve = geom.curve
    x = np.asarray(x, dtype=float).reshape(-1, 2)
    if isinstance(curve, FlatEdge):
        return x[:, 0].copy(), x[:, 1] - curve.height
    # nearest-sample starting guess, then Newton on (x - c(q)) . tau(q) = 0
    qs = np.linspace(-geom.kappa, curve.length + geom.kappa, 513)
    cs = curve.point(qs)
    d2 = ((x[:, None, :] - cs[None, :, :]) ** 2).sum(axis=-1)
    q = qs[np.argmin(d2, axis=1)]
    for _ in range(maxit):
        r = x - curve.point(q)
        f = (r * curve.tangent(q)).sum(axis=-1)
        fp = -1.0 + curve.weingarten(q) * (r * curve.normal(q)).sum(axis=-1)
        dq = -f / fp
        q = q + dq
        if np.max(np.abs(dq)) <= tol * max(1.0, curve.length):
            break
    s = ((x - curve.point(q)) * curve.normal(q)).sum(axis=-1)
    return q, s


def tube_coords(geom: ReferenceGeometry, x) -> tuple[np.ndarray, np.ndarray]:
    """Inverse of ``(q, s) -> c(q) + s nu(q)`` on the closed tube of half-width kappa."""
    x = np.asarray(x, dtype=float)
    shape = x.shape[:-1]
    q, s = _tube_coords_raw(geom, x)
    eps = 1e-12 * max(1.0, geom.length)
    bad = (np.abs(s) > geom.kappa + eps) | (q < -eps) | (q > geom.length + eps)
    if np.any(bad):
        i = int(np.flatnonzero(bad)[0])
        raise OutOfTubeError(f"point {x.reshape(-1, 2)[i]} is outside the tube (q={q[i]:.4g}, s={s[i]:.4g})")
    return q.reshape(shape), s.reshape(shape)


def tube_point(geom: ReferenceGeometry, q, s) -> np.ndarray:
    q = np.asarray(q, dtype=float)
    return geom.curve.point(q) + np.asarray(s, dtype=float)[..., None] * geom.curve.normal(q)


def _moving_part(geom: ReferenceGeometry, x: np.ndarray):
    """Tube coordinates of points affected by the transform, plus a mask."""
    x = np.asarray(x, dtype=float).reshape(-1, 2)
    q, s = _tube_coords_raw(geom, x)
    inside = (s > -geom.kappa) & (s <= geom.kappa)
    return x, q, s, inside


# --------------------------------------------------------------------------
# Hanzawa transform
# --------------------------------------------------------------------------

def hanzawa(geom: ReferenceGeometry, eta: ShellProfile, x, check: bool = True) -> np.ndarray:
    x_in = np.asarray(x, dtype=float)
    if check:
        check_admissible(geom, eta)
    x, q, s, inside = _moving_part(geom, x_in)
    out = x.copy()
    if np.any(inside):
        qi, si = q[inside], s[inside]
        shift = eta.eval(qi) * geom.beta_hat(si)
        out[inside] += shift[:, None] * geom.curve.normal(qi)
    return out.reshape(x_in.shape)


def hanzawa_jacobian(geom: ReferenceGeometry, eta: ShellProfile, x, check: bool = True):
    """Jacobian matrices (..., 2, 2) and determinants (...) of the Hanzawa map.

    Written in the moving frame (tau, nu) the matrix is

        [[(1 - W sigma) / (1 - W s), 0], [eta' beta / (1 - W s), 1 + eta beta'/kappa]]

    with ``sigma = s + eta beta``, so each entry is affine in ``eta`` and ``eta'``.
    """
    x_in = np.asarray(x, dtype=float)
    if check:
        check_admissible(geom, eta)
    x, q, s, inside = _moving_part(geom, x_in)
    n = x.shape[0]
    F = np.broadcast_to(np.eye(2), (n, 2, 2)).copy()
    if np.any(inside):
        qi, si = q[inside], s[inside]
        e0, e1 = eta.eval(qi), eta.eval(qi, 1)
        b0, b1 = geom.beta_hat(si), geom.beta_hat(si, 1)
        w = geom.weingarten(qi)
        a_tt = (1.0 - w * (si + e0 * b0)) / (1.0 - w * si)
        a_nt = e1 * b0 / (1.0 - w * si)
        a_nn = 1.0 + e0 * b1
        tau, nu = geom.curve.tangent(qi), geom.curve.normal(qi)
        # F = a_tt tau(x)tau + a_nt nu(x)tau + a_nn nu(x)nu
        F[inside] = (a_tt[:, None, None] * tau[:, :, None] * tau[:, None, :]
                     + a_nt[:, None, None] * nu[:, :, None] * tau[:, None, :]
                     + a_nn[:, None, None] * nu[:, :, None] * nu[:, None, :])
    det = F[:, 0, 0] * F[:, 1, 1] - F[:, 0, 1] * F[:, 1, 0]
    return F.reshape(x_in.shape[:-1] + (2, 2)), det.reshape(x_in.shape[:-1])


def hanzawa_inverse(geom: ReferenceGeometry, eta: ShellProfile, y, tol: float = 1e-12,
                    maxit: int = 50, return_mask: bool = False, check: bool = True):
    """Reference point ``x`` with ``Psi(x) = y``.

    The transform keeps every normal fiber, so only the scalar equation
    ``s + eta(q) beta(s/kappa) = sigma`` has to be solved, by Newton steps
    safeguarded with bisection on ``[-kappa, kappa]``.  Points above the
    deformed boundary are flagged in the optional mask (True means inside).
    """
    y_in = np.asarray(y, dtype=float)
    if check:
        check_admissible(geom, eta)
    y, q, sig, moving = _moving_part(geom, y_in)
    x = y.copy()
    ok = np.ones(y.shape[0], dtype=bool)
    idx = np.flatnonzero(moving)
    if idx.size:
        qi, si = q[idx], sig[idx]
        e = eta.eval(qi)
        ok[idx] = si <= e + tol
        lo = np.full(idx.size, -geom.kappa)
        hi = np.full(idx.size, geom.kappa)
        s = np.clip(si - e, lo, hi)
        for _ in range(maxit):
            f = s + e * geom.beta_hat(s) - si
            lo = np.where(f < 0.0, s, lo)
            hi = np.where(f > 0.0, s, hi)
            fp = 1.0 + e * geom.beta_hat(s, 1)
            s_new = s - f / fp
            out = (s_new <= lo) | (s_new >= hi) | ~np.isfinite(s_new)
            s_new = np.where(out, 0.5 * (lo + hi), s_new)
            done = np.abs(s_new - s) <= tol
            s = s_new
            if np.all(done):
                break
        x[idx] = tube_point(geom, qi, s)
    x = x.reshape(y_in.shape)
    if return_mask:
        return x, ok.reshape(y_in.shape[:-1])
    return x


def piola_push(geom: ReferenceGeometry, eta: ShellProfile, phi: Callable[[np.ndarray], np.ndarray]):
    """Return the physical field ``y -> (F phi / det F)(Psi^{-1}(y))``."""
    check_admissible(geom, eta)

    def pushed(y):
        x = hanzawa_inverse(geom, eta, y, check=False)
        F, det = hanzawa_jacobian(geom, eta, x, check=False)
        v = np.asarray(phi(x), dtype=float)
        return np.einsum("...ij,...j->...i", F, v) / det[..., None]

    return pushed


def flat_kinematics(geom: ReferenceGeometry, X2: np.ndarray, d: tuple, ddot: tuple | None = None):
    """Pointwise Hanzawa kinematics for the flat channel.

    ``d = (delta, delta', delta'')`` and ``ddot = (delta_t, delta_t')`` are the
    displacement and its time derivative evaluated at the first coordinate of
    the points.  Returns a dict with F, dF (``dF[..., i, j, k] = d_k F_ij``),
    J, dJ, Psi_dot and dPsi_dot.
    """
    s = np.asarray(X2) - geom.height
    b0, b1, b2 = geom.beta_hat(s), geom.beta_hat(s, 1), geom.beta_hat(s, 2)
    e0, e1, e2 = (np.broadcast_to(np.asarray(v, dtype=float), s.shape) for v in d)
    shape = s.shape
    F = np.zeros(shape + (2, 2))
    F[..., 0, 0] = 1.0
    F[..., 1, 0] = e1 * b0
    F[..., 1, 1] = 1.0 + e0 * b1
    dF = np.zeros(shape + (2, 2, 2))
    dF[..., 1, 0, 0] = e2 * b0
    dF[..., 1, 0, 1] = e1 * b1
    dF[..., 1, 1, 0] = e1 * b1
    dF[..., 1, 1, 1] = e0 * b2
    J = F[..., 1, 1].copy()
    dJ = dF[..., 1, 1, :].copy()
    out = {"F": F, "dF": dF, "J": J, "dJ": dJ, "beta": b0, "dbeta": b1}
    if ddot is not None:
        v0, v1 = (np.broadcast_to(np.asarray(v, dtype=float), shape) for v in ddot)
        pd = np.zeros(shape + (2,))
        pd[..., 1] = v0 * b0
        dpd = np.zeros(shape + (2, 2))
        dpd[..., 1, 0] = v1 * b0
        dpd[..., 1, 1] = v0 * b1
        out["Psi_dot"] = pd
        out["dPsi_dot"] = dpd
    return out


# --------------------------------------------------------------------------
# deformed boundary
# --------------------------------------------------------------------------

def pseudonormal_gamma(geom: ReferenceGeometry, eta: ShellProfile, q) -> np.ndarray:
    e = eta.eval(np.asarray(q, dtype=float))
    return 1.0 - 2.0 * geom.mean_curvature(q) * e + geom.gauss_curvature(q) * e * e


def scaled_pseudonormal(geom: ReferenceGeometry, eta: ShellProfile, q) -> np.ndarray:
    """Rotated tangent of the deformed boundary ``Phi(q) = c(q) + eta(q) nu(q)``."""
    q = np.asarray(q, dtype=float)
    e0, e1 = eta.eval(q), eta.eval(q, 1)
    w = geom.weingarten(q)
    tau, nu = geom.curve.tangent(q), geom.curve.normal(q)
    return (1.0 - w * e0)[..., None] * nu - e1[..., None] * tau


def boundary_metric_gamma(geom: ReferenceGeometry, eta: ShellProfile, q) -> np.ndarray:
    """``nu . nu_eta |dPhi/dq|`` computed from the deformed curve itself."""
    q = np.asarray(q, dtype=float)
    curve = geom.curve
    dphi = curve.tangent(q) + eta.eval(q, 1)[..., None] * curve.normal(q) \
        + eta.eval(q)[..., None] * curve.normal_derivative(q)
    speed = np.linalg.norm(dphi, axis=-1)
    nu_eta = curve.orientation * _perp(dphi) / speed[..., None]
    return (curve.normal(q) * nu_eta).sum(axis=-1) * speed


def deformed_boundary(geom: ReferenceGeometry, eta: ShellProfile, q) -> np.ndarray:
    q = np.asarray(q, dtype=float)
    return geom.curve.point(q) + eta.eval(q)[..., None] * geom.curve.normal(q)


# --------------------------------------------------------------------------
# integrals over the deformed channel
# --------------------------------------------------------------------------

def _channel_rule(geom: ReferenceGeometry, order: int, n_cells: int):
    """Reference-domain composite rule with breaks at the cutoff kinks."""
    H, k = geom.height, geom.kappa
    n = points_for_order(order)
    xb = np.linspace(0.0, geom.length, n_cells + 1)
    kinks = sorted({0.0, H - k, H + k * geom.cutoff.lower, H + k * geom.cutoff.upper, H})
    kinks = [v for v in kinks if 0.0 <= v <= H]
    yb = np.unique(np.concatenate([np.linspace(a, b, max(2, n_cells // 2) + 1)
                                   for a, b in zip(kinks[:-1], kinks[1:])]))
    return composite_box(xb, yb, n)


def _require_flat(geom: ReferenceGeometry, what: str):
    if not geom.is_flat:
        raise ConfigurationError(f"{what} is implemented for the flat channel geometry")


def green_pairing(geom: ReferenceGeometry, eta: ShellProfile, phi, grad_phi, psi, grad_psi,
                  degree: int = 3, order: int = 6, n_cells: int = 16) -> tuple[float, float]:
    """Both sides of the Green-type formula on the deformed channel.

    ``phi``/``grad_phi`` return (N, 2)/(N, 2, 2) and ``psi``/``grad_psi``
    return (N,)/(N, 2) at physical points (N, 2).  ``order`` is the degree of
    exactness of the rule; it has to reach ``2 * degree``.
    """
    _require_flat(geom, "green_pairing")
    if order < 2 * degree:
        raise ConfigurationError(
            f"quadrature of exactness {order} cannot integrate degree-{degree} products exactly"
        )
    check_admissible(geom, eta)
    X, w = _channel_rule(geom, order, n_cells)
    Y = hanzawa(geom, eta, X, check=False)
    _, J = hanzawa_jacobian(geom, eta, X, check=False)
    f, gf, p, gp = phi(Y), grad_phi(Y), psi(Y), grad_psi(Y)
    integrand = (f * gp).sum(axis=1) + np.trace(gf, axis1=1, axis2=2) * p
    lhs = float(np.sum(integrand * J * w))

    n = points_for_order(order)
    qb = np.linspace(0.0, geom.length, 4 * n_cells + 1)
    qq, wq = composite(qb, n)
    Ym = deformed_boundary(geom, eta, qq)
    vm = scaled_pseudonormal(geom, eta, qq)
    rhs = float(np.sum((phi(Ym) * vm).sum(axis=1) * psi(Ym) * wq))
    # bottom edge does not move
    Yb = np.column_stack([qq, np.zeros_like(qq)])
    rhs += float(np.sum(-phi(Yb)[:, 1] * psi(Yb) * wq))
    # lateral edges slide along themselves, stretched by 1 + eta beta'
    H = geom.height
    yb = np.unique(np.concatenate([np.linspace(0.0, H, 2 * n_cells + 1),
                                   [H + geom.kappa * geom.cutoff.lower, H + geom.kappa * geom.cutoff.upper]]))
    yy, wy = composite(yb[(yb >= 0) & (yb <= H)], n)
    for xend, sign in ((0.0, -1.0), (geom.length, 1.0)):
        Xl = np.column_stack([np.full_like(yy, xend), yy])
        Yl = hanzawa(geom, eta, Xl, check=False)
        stretch = 1.0 + eta.eval(np.array([xend]))[0] * geom.beta_hat(yy - H, 1)
        rhs += float(np.sum(sign * phi(Yl)[:, 0] * psi(Yl) * np.abs(stretch) * wy))
    return lhs, rhs


def korn_ratio(geom: ReferenceGeometry, eta: ShellProfile, phi, grad_phi, r: float = 13.0 / 7.0,
               p: float = 2.0, order: int = 7, n_cells: int = 16) -> float:
    """``||grad phi||_r / (||D phi||_p + ||phi||_p)`` on the deformed channel."""
    if not r < p:
        raise ParameterError(f"the Korn-type ratio needs r < p, got r={r}, p={p}")
    _require_flat(geom, "korn_ratio")
    check_admissible(geom, eta)
    X, w = _channel_rule(geom, order, n_cells)
    Y = hanzawa(geom, eta, X, check=False)
    _, J = hanzawa_jacobian(geom, eta, X, check=False)
    wj = w * J
    f, g = phi(Y), grad_phi(Y)
    D = 0.5 * (g + np.swapaxes(g, 1, 2))
    grad_r = np.sum(np.sqrt((g * g).sum(axis=(1, 2))) ** r * wj) ** (1.0 / r)
    sym_p = np.sum(np.sqrt((D * D).sum(axis=(1, 2))) ** p * wj) ** (1.0 / p)
    val_p = np.sum(np.sqrt((f * f).sum(axis=1)) ** p * wj) ** (1.0 / p)
    denom = sym_p + val_p
    return float(grad_r / denom) if denom > 0 else 0.0
