"""Divergence-free extension of shell functions into the fluid domain.

In the tube around the shell a shell function ``b`` is transported along the
normal fibers with the exponential weight that keeps the field solenoidal.
Below the tube the field is continued by a discrete Stokes solve whose
boundary data carries a compensating inflow on a bottom patch, so the total
flux vanishes.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .discretization.assembly import FlatChannelAssembler, GeometryState
from .discretization.mesh import MixedSpace, ReferenceMesh, channel_mesh
from .errors import ConfigurationError, InvariantViolation, SolverFailure
from .geometry import ReferenceGeometry, _tube_coords_raw, check_admissible, tube_coords
from .quadrature import gauss_unit

FIBER_POINTS = 8


def normal_divergence(geom: ReferenceGeometry, q, tau) -> np.ndarray:
    """``div(nu o q)`` at the point ``c(q) + tau nu(q)``."""
    w = geom.weingarten(q)
    return -w / (1.0 - w * tau)


def fiber_factor(geom: ReferenceGeometry, eta, q, s) -> np.ndarray:
    """``exp(-int_{eta(q)}^{s} div(nu o q)(q + tau nu) dtau)`` by Gauss quadrature."""
    q, s = np.broadcast_arrays(np.asarray(q, dtype=float), np.asarray(s, dtype=float))
    e = eta.eval(q)
    t, w = gauss_unit(FIBER_POINTS)
    tau = e[..., None] + (s - e)[..., None] * t
    integral = (s - e) * (normal_divergence(geom, q[..., None], tau) * w).sum(axis=-1)
    return np.exp(-integral)


def fiber_factor_constant_curvature(geom: ReferenceGeometry, eta, q, s) -> np.ndarray:
    w = geom.weingarten(q)
    return (1.0 - w * eta.eval(q)) / (1.0 - w * np.asarray(s))


def tube_extension(geom: ReferenceGeometry, eta, b, x) -> np.ndarray:
    """Tube part of the extension evaluated at physical points ``x`` (..., 2)."""
    check_admissible(geom, eta)
    x = np.asarray(x, dtype=float)
    q, s = tube_coords(geom, x)
    return (fiber_factor(geom, eta, q, s) * b.eval(q))[..., None] * geom.curve.normal(q)


def tube_extension_rate(geom: ReferenceGeometry, eta, eta_rate, b, b_rate, x) -> np.ndarray:
    """Time derivative of the tube part for time-dependent ``eta`` and ``b``."""
    x = np.asarray(x, dtype=float)
    q, s = tube_coords(geom, x)
    fac = fiber_factor(geom, eta, q, s)
    div_b = normal_divergence(geom, q, eta.eval(q))
    scal = b_rate.eval(q) + b.eval(q) * div_b * eta_rate.eval(q)
    return (fac * scal)[..., None] * geom.curve.normal(q)


def compensation_bump(geom: ReferenceGeometry, x) -> np.ndarray:
    """C^2 bump supported on the central third of the bottom edge (unnormalized)."""
    L = geom.length
    t = (np.asarray(x, dtype=float) - 0.5 * L) / (L / 6.0)
    return np.where(np.abs(t) < 1.0, (1.0 - t * t) ** 3, 0.0)


def _simpson_edges(xv: np.ndarray, vals: np.ndarray) -> float:
    """Integral of the continuous piecewise-quadratic interpolant on the Q2 node row ``xv``."""
    h = xv[2::2] - xv[:-2:2]
    return float(np.sum(h / 6.0 * (vals[:-2:2] + 4.0 * vals[1::2] + vals[2::2])))


class StokesLift:
    """Discrete Stokes continuation below the tube on the flat channel.

    The factorization of the lower-region Stokes system is computed once;
    each lift is then a single back-substitution.
    """

    def __init__(self, geom: ReferenceGeometry, mesh: ReferenceMesh | None = None,
                 space: MixedSpace | None = None, viscosity: float = 1.0):
        if not geom.is_flat:
            raise ConfigurationError("the Stokes lift is implemented for the flat channel")
        self.geom = geom
        self.mesh = mesh or channel_mesh(geom)
        self.space = space or MixedSpace(self.mesh)
        H, a = geom.height, geom.alpha
        self.y_interface = H - a
        if not np.any(np.isclose(self.mesh.ynodes, self.y_interface, rtol=0, atol=1e-13)):
            raise ConfigurationError("the mesh needs a grid line on the inner tube boundary y = H - alpha")
        asm = FlatChannelAssembler(self.mesh, geom, self.space, density=1.0, viscosity=viscosity)
        self.assembler = asm
        ops, _, _ = asm.assemble(GeometryState.zero(asm.gspace), with_rate=False)
        mesh = self.mesh
        nv = mesh.n_vnodes
        lower_el = np.flatnonzero(mesh.origin[:, 1] + 0.5 * mesh.hy < self.y_interface)
        mask = np.zeros(mesh.n_elements)
        mask[lower_el] = 1.0
        kin0 = asm.kinematics(GeometryState.zero(asm.gspace), with_rate=False)
        A = asm.viscous(kin0, asm.dof_fields(kin0), mask=mask)
        D = asm.divergence_reference(mask=mask)
        vy = mesh.vcoords[:, 1]
        lower_nodes = np.flatnonzero(vy <= self.y_interface + 1e-13)
        lower_p = np.flatnonzero(mesh.pcoords[:, 1] <= self.y_interface + 1e-13)
        vx = mesh.vcoords[:, 0]
        bnd = lower_nodes[(np.abs(vy[lower_nodes]) < 1e-13) | (np.abs(vy[lower_nodes] - self.y_interface) < 1e-13)
                          | (np.abs(vx[lower_nodes]) < 1e-13) | (np.abs(vx[lower_nodes] - geom.length) < 1e-13)]
        inner = np.setdiff1d(lower_nodes, bnd)
        self.lower_nodes, self.boundary_nodes = lower_nodes, bnd
        self.upper_nodes = np.flatnonzero(vy >= self.y_interface - 1e-13)
        self.interface_nodes = np.flatnonzero(np.abs(vy - self.y_interface) < 1e-13)
        self.interface_nodes = self.interface_nodes[np.argsort(vx[self.interface_nodes])]
        self.bottom_nodes = np.flatnonzero(np.abs(vy) < 1e-13)
        self.bottom_nodes = self.bottom_nodes[np.argsort(vx[self.bottom_nodes])]
        self.free = np.concatenate([inner, inner + nv])
        self.bdofs = np.concatenate([bnd, bnd + nv])
        self.pdofs = lower_p[1:]  # one pressure value pinned
        A = sp.csr_matrix(A)
        D = sp.csr_matrix(D)
        self._A_fb = A[self.free][:, self.bdofs]
        self._D_pb = D[self.pdofs][:, self.bdofs]
        K = A[self.free][:, self.free]
        B = D[self.pdofs][:, self.free]
        self._S = spla.splu(sp.bmat([[K, B.T], [B, None]], format="csc"))
        self._nfree = self.free.size
        self.div_ref = ops.div
        # compensation profile normalized so its Q2 interpolant has unit integral
        xb = vx[self.bottom_nodes]
        mu = compensation_bump(geom, xb)
        self.mu_nodes = mu / _simpson_edges(xb, mu)

    def tube_coefficients(self, b) -> np.ndarray:
        """Nodal vector of ``(0, b(x1))`` on the tube part of the mesh."""
        nv = self.mesh.n_vnodes
        u = np.zeros(self.space.n_u)
        nodes = self.upper_nodes
        u[nodes + nv] = b.eval(self.mesh.vcoords[nodes, 0])
        return u

    def interface_flux(self, u: np.ndarray) -> float:
        """Upward flux of the nodal field through ``y = H - alpha``."""
        nv = self.mesh.n_vnodes
        nodes = self.interface_nodes
        return _simpson_edges(self.mesh.vcoords[nodes, 0], u[nodes + nv])

    def boundary_flux(self, u: np.ndarray) -> float:
        """Outward flux of the lower-region boundary data (top, bottom and sides)."""
        nv = self.mesh.n_vnodes
        vx, vy = self.mesh.vcoords[:, 0], self.mesh.vcoords[:, 1]
        total = self.interface_flux(u)
        bot = self.bottom_nodes
        total -= _simpson_edges(vx[bot], u[bot + nv])
        for xend, sign in ((0.0, -1.0), (self.geom.length, 1.0)):
            side = np.flatnonzero((np.abs(vx - xend) < 1e-13) & (vy <= self.y_interface + 1e-13))
            side = side[np.argsort(vy[side])]
            total += sign * _simpson_edges(vy[side], u[side])
        return total

    def lift(self, u_tube: np.ndarray) -> np.ndarray:
        """Continue a nodal tube field by the compensated Stokes solution."""
        nv = self.mesh.n_vnodes
        u = np.zeros(self.space.n_u)
        u[self.upper_nodes] = u_tube[self.upper_nodes]
        u[self.upper_nodes + nv] = u_tube[self.upper_nodes + nv]
        flux = self.interface_flux(u)
        u[self.bottom_nodes + nv] = flux * self.mu_nodes
        net = self.boundary_flux(u)
        if abs(net) > 1e-12 * max(1.0, abs(flux)):
            raise InvariantViolation(f"compensated boundary data has net flux {net:.3e}")
        ub = u[self.bdofs]
        rhs = np.concatenate([-self._A_fb @ ub, -self._D_pb @ ub])
        sol = self._S.solve(rhs)
        if not np.all(np.isfinite(sol)):
            raise SolverFailure("Stokes lift produced non-finite values")
        u[self.free] = sol[:self._nfree]
        return u

    def extend_coefficients(self, b) -> np.ndarray:
        return self.lift(self.tube_coefficients(b))


@dataclass
class ExtensionField:
    """``F_eta b`` as a field on the physical points of the enlarged domain."""

    lift: StokesLift
    eta: object
    b: object
    coeffs: np.ndarray

    def __call__(self, x) -> np.ndarray:
        geom = self.lift.geom
        x = np.asarray(x, dtype=float)
        flat = x.reshape(-1, 2)
        q, s = _tube_coords_raw(geom, flat)
        out = np.empty_like(flat)
        tube = s > -geom.alpha
        if np.any(tube):
            out[tube] = tube_extension(geom, self.eta, self.b, flat[tube])
        if np.any(~tube):
            out[~tube] = self.lift.space.evaluate(self.coeffs, flat[~tube])
        return out.reshape(x.shape)


def extend(geom: ReferenceGeometry, eta, b, lift: StokesLift | None = None) -> ExtensionField:
    """The divergence-free extension operator applied to the shell function ``b``.

    On the flat channel the tube transport does not depend on ``eta``, so the
    same lifted field serves every admissible displacement.
    """
    check_admissible(geom, eta)
    lift = lift or StokesLift(geom)
    return ExtensionField(lift, eta, b, lift.extend_coefficients(b))


def extend_time(geom: ReferenceGeometry, eta_t, b_t, t: float, lift: StokesLift | None = None,
                dt: float = 1e-4):
    """Field at time ``t`` and its time derivative.

    ``eta_t(t)`` and ``b_t(t)`` return profiles.  The tube part of the rate is
    the analytic formula; the Stokes part, being linear in the data, uses the
    centered difference quotient of ``b`` that the samples provide.
    """
    lift = lift or StokesLift(geom)
    field = extend(geom, eta_t(t), b_t(t), lift)

    class _Diff:
        def __init__(self, f0, f1, h):
            self.f0, self.f1, self.h = f0, f1, h

        def eval(self, q, der=0):
            return (self.f1.eval(q, der) - self.f0.eval(q, der)) / (2.0 * self.h)

    b_rate = _Diff(b_t(t - dt), b_t(t + dt), dt)
    e_rate = _Diff(eta_t(t - dt), eta_t(t + dt), dt)
    rate_coeffs = lift.extend_coefficients(b_rate)

    def rate(x):
        x = np.asarray(x, dtype=float)
        flat = x.reshape(-1, 2)
        q, s = _tube_coords_raw(geom, flat)
        out = np.empty_like(flat)
        tube = s > -geom.alpha
        if np.any(tube):
            out[tube] = tube_extension_rate(geom, field.eta, e_rate, field.b, b_rate, flat[tube])
        if np.any(~tube):
            out[~tube] = lift.space.evaluate(rate_coeffs, flat[~tube])
        return out.reshape(x.shape)

    return field, rate


def extension_matrix(lift: StokesLift, shell_basis) -> np.ndarray:
    """Dense matrix mapping shell coefficients to the nodal vector of the extension."""
    cols = []
    for k in range(shell_basis.n_modes):
        e = np.zeros(shell_basis.n_modes)
        e[k] = 1.0
        cols.append(lift.extend_coefficients(shell_basis.function(e)))
    return np.column_stack(cols)


def extension_h1_norm(field: ExtensionField, n_fiber: int = 6) -> float:
    """H1 norm of the extension over the reference channel plus the outer half of the tube."""
    lift = field.lift
    geom = lift.geom
    asm = lift.assembler
    X = asm.X.reshape(-1, 2)
    W = asm.W.reshape(-1)
    low = X[:, 1] < lift.y_interface
    vals, grads = lift.space.evaluate(field.coeffs, X[low], grad=True)
    total = np.sum(((vals**2).sum(axis=1) + (grads**2).sum(axis=(1, 2))) * W[low])
    # tube: the field is b(q) nu, constant along fibers; integrate (b^2 + b'^2) over s in (-alpha, alpha)
    q = lift.assembler.top_x.ravel()
    wq = lift.assembler.top_W.ravel()
    b0, b1 = field.b.eval(q), field.b.eval(q, 1)
    total += 2.0 * geom.alpha * np.sum((b0**2 + b1**2) * wq)
    return float(np.sqrt(total))
