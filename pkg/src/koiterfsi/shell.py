"""Linear Koiter shell with transverse displacements on a one-dimensional mid-curve.

In two dimensions the shell is a curve parametrized by arclength, so all the
tensors reduce to scalars: the elasticity tensor acts as the number
``C = 4 mu lambda / (lambda + 2 mu) + 4 mu``, the membrane strain is
``-h eta`` and the bending strain is ``eta'' - k eta``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.interpolate import BSpline
from scipy.linalg import eigh
from scipy.optimize import brentq

from .errors import ConfigurationError, ParameterError
from .geometry import ReferenceGeometry
from .quadrature import composite, points_for_order

SHELL_KINDS = ("clamped-beam-eigenfunctions", "cubic-bsplines-clamped", "quadratic-bsplines-clamped")


@dataclass(frozen=True)
class KoiterMaterial:
    lame_lambda: float = 1.0
    lame_mu: float = 1.0
    thickness_half: float = 1.0
    density: float = 1.0

    def __post_init__(self):
        if not self.lame_mu > 0:
            raise ParameterError("the Lame constant mu must be positive")
        if not self.lame_lambda >= 0:
            raise ParameterError("the Lame constant lambda must be non-negative")
        if not (self.thickness_half > 0 and self.density > 0):
            raise ParameterError("shell thickness and density must be positive")

    @property
    def modulus(self) -> float:
        lam, mu = self.lame_lambda, self.lame_mu
        return 4.0 * mu * lam / (lam + 2.0 * mu) + 4.0 * mu

    @property
    def membrane_coefficient(self) -> float:
        return self.thickness_half * self.modulus

    @property
    def bending_coefficient(self) -> float:
        return self.thickness_half**3 / 3.0 * self.modulus

    @property
    def inertia(self) -> float:
        """Coefficient of the shell acceleration in the weak form, ``2 eps_s rho_s``."""
        return 2.0 * self.thickness_half * self.density


# --------------------------------------------------------------------------
# raw mode families
# --------------------------------------------------------------------------

def beam_wavenumbers(n: int, length: float) -> np.ndarray:
    """Roots of ``cos x cosh x = 1`` divided by the beam length."""
    f = lambda x: np.cos(x) - 1.0 / np.cosh(x)
    roots = []
    for k in range(1, n + 1):
        c = (k + 0.5) * np.pi
        roots.append(brentq(f, c - 0.5, c + 0.5, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=200))
    return np.asarray(roots) / length


class _BeamModes:
    """Clamped-clamped Euler-Bernoulli modes in an overflow-free form.

    With ``x = k q`` and ``X = k L`` the mode ``cosh x - cos x - s (sinh x - sin x)``
    is rewritten as ``A e^{x - X} + B e^{-x} - cos x + s sin x``.
    """

    def __init__(self, n: int, length: float):
        self.length = length
        self.k = beam_wavenumbers(n, length)
        X = self.k * length
        em = np.exp(-X)
        self.s = (1.0 - 2.0 * np.cos(X) * em + em * em) / (1.0 - 2.0 * np.sin(X) * em - em * em)
        self.A = (np.cos(X) - np.sin(X) - em) / (1.0 - em * em - 2.0 * np.sin(X) * em)
        self.B = 0.5 * (1.0 + self.s)
        self.scale = np.ones(n)
        qq, ww = composite(np.linspace(0.0, length, 8 * n + 33), 8)
        v = self._raw(qq, 0)
        self.scale = 1.0 / np.sqrt((v * v * ww[:, None]).sum(axis=0))

    def _raw(self, q, der):
        q = np.asarray(q, dtype=float)[:, None]
        k, A, B, s = self.k, self.A, self.B, self.s
        x = k * q
        ep, en = np.exp(k * (q - self.length)), np.exp(-x)
        c, sn = np.cos(x), np.sin(x)
        if der == 0:
            v = A * ep + B * en - c + s * sn
        elif der == 1:
            v = k * (A * ep - B * en + sn + s * c)
        elif der == 2:
            v = k**2 * (A * ep + B * en + c - s * sn)
        else:
            raise ValueError("mode derivatives are available up to order 2")
        return v * self.scale

    def __call__(self, q, der=0):
        return self._raw(q, der)

    def breakpoints(self):
        return np.linspace(0.0, self.length, 4 * len(self.k) + 33)


class _ClampedSplines:
    """B-splines of degree ``p`` on open knots with the two end functions removed at each side."""

    def __init__(self, degree: int, breaks: np.ndarray):
        self.degree = degree
        self.breaks = np.asarray(breaks, dtype=float)
        p = degree
        self.knots = np.concatenate([[self.breaks[0]] * p, self.breaks, [self.breaks[-1]] * p])
        nb = len(self.knots) - p - 1
        self.index = np.arange(2, nb - 2)
        if self.index.size < 1:
            raise ParameterError("too few knot spans for a clamped spline space")
        eye = np.eye(nb)
        self._bsp = [BSpline(self.knots, eye[:, self.index], p, extrapolate=False)]
        for d in (1, 2):
            self._bsp.append(self._bsp[0].derivative(d))

    def __call__(self, q, der=0):
        q = np.clip(np.asarray(q, dtype=float), self.breaks[0], self.breaks[-1])
        out = self._bsp[der](q)
        return np.nan_to_num(out)

    def breakpoints(self):
        return self.breaks


class ShellBasis:
    """Clamped shell basis with Gram matrices on the shell quadrature.

    ``combination`` (raw x modes) turns the raw family into the working modes;
    it is the identity unless a Ritz reduction was requested.
    """

    def __init__(self, kind: str, raw, geom: ReferenceGeometry, quad_order: int, combination=None):
        self.kind = kind
        self.geom = geom
        self.raw = raw
        self.quad_order = quad_order
        nraw = raw(np.array([0.0])).shape[1]
        self.combination = np.eye(nraw) if combination is None else np.asarray(combination)
        self.quad_nodes, self.quad_weights = composite(raw.breakpoints(), points_for_order(quad_order))
        self.values = [self.eval(self.quad_nodes, d) for d in range(3)]
        Y = self.values[0]
        self.mass = (Y * self.quad_weights[:, None]).T @ Y
        self._stiffness: dict = {}

    @property
    def n_modes(self) -> int:
        return self.combination.shape[1]

    def eval(self, q, der: int = 0) -> np.ndarray:
        q = np.asarray(q, dtype=float)
        return self.raw(q.ravel(), der) @ self.combination

    def stiffness(self, material: KoiterMaterial) -> np.ndarray:
        """Matrix of ``2 K(Y_j, Y_i)``."""
        if material not in self._stiffness:
            q, w = self.quad_nodes, self.quad_weights
            h = self.geom.second_form(q)
            k = self.geom.k_contraction(q)
            sig = -h[:, None] * self.values[0]
            xi = self.values[2] - k[:, None] * self.values[0]
            S = material.membrane_coefficient * (sig * w[:, None]).T @ sig \
                + material.bending_coefficient * (xi * w[:, None]).T @ xi
            self._stiffness[material] = 0.5 * (S + S.T)
        return self._stiffness[material]

    def function(self, coeffs, t: float = 0.0) -> "DisplacementField":
        return DisplacementField(self, np.asarray(coeffs, dtype=float), t)

    def project(self, profile) -> np.ndarray:
        """L2 projection coefficients of a profile onto the span of the modes."""
        rhs = (self.values[0] * (self.quad_weights * profile.eval(self.quad_nodes))[:, None]).sum(axis=0)
        return np.linalg.solve(self.mass, rhs)


def build_shell_basis(geom: ReferenceGeometry, n_modes: int, kind: str = "clamped-beam-eigenfunctions",
                      quad_order: int = 8, breaks=None, material: KoiterMaterial | None = None,
                      n_ritz: int | None = None) -> ShellBasis:
    """Clamped basis of the shell space.

    ``breaks`` fixes the knot vector of the spline kinds (otherwise uniform
    spans giving ``n_modes`` functions).  ``n_ritz`` keeps only the lowest
    generalized eigenvectors of (stiffness, mass) for ``material``.
    """
    if n_modes < 1:
        raise ParameterError("n_modes must be at least 1")
    L = geom.length
    if kind == "clamped-beam-eigenfunctions":
        raw = _BeamModes(n_modes, L)
    elif kind in ("cubic-bsplines-clamped", "quadratic-bsplines-clamped"):
        p = 3 if kind.startswith("cubic") else 2
        if breaks is None:
            # dimension of the clamped space is (number of spans) + p - 4
            breaks = np.linspace(0.0, L, n_modes + 5 - p)
        raw = _ClampedSplines(p, breaks)
    else:
        raise ConfigurationError(f"unsupported shell basis kind {kind!r}; choose one of {SHELL_KINDS}")
    basis = ShellBasis(kind, raw, geom, quad_order)
    if n_ritz is not None and n_ritz < basis.n_modes:
        mat = material or KoiterMaterial()
        lam, vec = eigh(basis.stiffness(mat), basis.mass)
        basis = ShellBasis(kind, raw, geom, quad_order, combination=vec[:, :n_ritz])
    return basis


class DisplacementField:
    """Shell function given by coefficients in a :class:`ShellBasis`."""

    def __init__(self, basis: ShellBasis, coeffs: np.ndarray, t: float = 0.0):
        self.basis = basis
        self.coeffs = coeffs
        self.t = t

    def eval(self, q, der: int = 0):
        q = np.asarray(q, dtype=float)
        return (self.basis.eval(q, der) @ self.coeffs).reshape(q.shape)


# --------------------------------------------------------------------------
# energy
# --------------------------------------------------------------------------

def _shell_rule(geom, eta, zeta, order=8, n_sub=64):
    for f in (eta, zeta):
        if isinstance(f, DisplacementField):
            return f.basis.quad_nodes, f.basis.quad_weights
    return composite(np.linspace(0.0, geom.length, n_sub + 1), points_for_order(order))


def koiter_energy(mat: KoiterMaterial, geom: ReferenceGeometry, eta, zeta, rule=None) -> float:
    """Bilinear Koiter energy ``K(eta, zeta)`` by quadrature of the strain integrand."""
    q, w = rule if rule is not None else _shell_rule(geom, eta, zeta)
    h, k = geom.second_form(q), geom.k_contraction(q)
    e0, z0 = eta.eval(q), zeta.eval(q)
    sig_e, sig_z = -h * e0, -h * z0
    xi_e, xi_z = eta.eval(q, 2) - k * e0, zeta.eval(q, 2) - k * z0
    C = mat.modulus
    dens = mat.thickness_half * C * sig_e * sig_z + mat.thickness_half**3 / 3.0 * C * xi_e * xi_z
    return 0.5 * float(np.sum(dens * w))


def koiter_gradient(mat: KoiterMaterial, geom: ReferenceGeometry, eta: DisplacementField) -> np.ndarray:
    """Dual vector ``G`` with ``2 K(eta, Y_j) = G_j`` for every basis mode."""
    return eta.basis.stiffness(mat) @ eta.coeffs


def koiter_l2_gradient(mat: KoiterMaterial, geom: ReferenceGeometry, eta: DisplacementField) -> DisplacementField:
    """The shell function representing ``2 K(eta, .)`` in the L2 inner product."""
    return DisplacementField(eta.basis, np.linalg.solve(eta.basis.mass, koiter_gradient(mat, geom, eta)), eta.t)


def coercivity_constant(mat: KoiterMaterial, basis: ShellBasis) -> float:
    """Smallest ratio ``K(eta, eta) / ||eta''||^2`` over the span of the basis."""
    Y2 = basis.values[2]
    G2 = (Y2 * basis.quad_weights[:, None]).T @ Y2
    lam = eigh(0.5 * basis.stiffness(mat), G2, eigvals_only=True)
    return float(lam[0])
