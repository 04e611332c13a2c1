"""Assembly of moving-domain integrals on the reference channel.

Velocity unknowns are reference coefficients.  The physical velocity is their
Piola image ``F u_hat / J`` composed with the inverse Hanzawa map, so the
discrete divergence constraint does not depend on the geometry.  Every
integral over the moving domain is pulled back with weight ``J`` and
gradients transform with ``F^{-1}``.

The domain displacement lives in a cubic spline space on the mesh
x-breakpoints, which keeps it smooth inside every element.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
import scipy.sparse as sp
from scipy.interpolate import BSpline, make_lsq_spline

from ..errors import AdmissibilityError, ConfigurationError
from ..geometry import ReferenceGeometry, flat_kinematics
from ..quadrature import gauss_unit
from .mesh import MixedSpace, ReferenceMesh, q1_shape, q2_shape


def _gram(A: np.ndarray, B: np.ndarray, w: np.ndarray) -> np.ndarray:
    """``out[e, k, l] = sum_q sum_c A[e, q, k, c] B[e, q, l, c] w[e, q]`` as a batched product."""
    ne, nq, nk = A.shape[:3]
    a = (A * w.reshape(ne, nq, *([1] * (A.ndim - 2)))).reshape(ne, nq, nk, -1)
    a = a.transpose(0, 2, 1, 3).reshape(ne, nk, -1)
    b = B.reshape(ne, nq, B.shape[2], -1).transpose(0, 2, 1, 3).reshape(ne, B.shape[2], -1)
    return a @ b.transpose(0, 2, 1)


class SplineProfile:
    def __init__(self, spline: BSpline):
        self._s = [spline, spline.derivative(1), spline.derivative(2)]

    def eval(self, q, der: int = 0):
        return self._s[der](np.asarray(q, dtype=float))


class GeometrySpace:
    """C^2 cubic splines with knots at the mesh x-breakpoints."""

    def __init__(self, mesh: ReferenceMesh):
        xb = mesh.xnodes
        self.breaks = xb
        self.knots = np.concatenate([[xb[0]] * 3, xb, [xb[-1]] * 3])
        self.n = len(self.knots) - 4
        eye = np.eye(self.n)
        base = BSpline(self.knots, eye, 3, extrapolate=True)
        self._bsp = [base, base.derivative(1), base.derivative(2)]
        t, _ = gauss_unit(6)
        h = np.diff(xb)
        self.fit_points = (xb[:-1, None] + h[:, None] * t[None, :]).ravel()

    def matrix(self, x, der: int = 0) -> np.ndarray:
        return self._bsp[der](np.asarray(x, dtype=float).ravel())

    def fit(self, values_or_profile) -> np.ndarray:
        """Least-squares coefficients from a profile (or values at ``fit_points``)."""
        if hasattr(values_or_profile, "eval"):
            vals = values_or_profile.eval(self.fit_points)
        else:
            vals = np.asarray(values_or_profile, dtype=float)
        return make_lsq_spline(self.fit_points, vals, self.knots, 3).c.copy()

    def profile(self, coeffs) -> SplineProfile:
        return SplineProfile(BSpline(self.knots, np.asarray(coeffs, dtype=float), 3, extrapolate=True))


@dataclass
class GeometryState:
    """Domain displacement and its time derivative as geometry-spline coefficients."""

    coeffs: np.ndarray
    rate: np.ndarray

    @classmethod
    def zero(cls, gspace: GeometrySpace) -> "GeometryState":
        return cls(np.zeros(gspace.n), np.zeros(gspace.n))

    @classmethod
    def interpolate(cls, a: "GeometryState", b: "GeometryState", theta: float) -> "GeometryState":
        return cls((1 - theta) * a.coeffs + theta * b.coeffs, (1 - theta) * a.rate + theta * b.rate)


@dataclass
class OperatorSet:
    mass: sp.csr_matrix
    visc: sp.csr_matrix
    div: sp.csr_matrix
    rate: sp.csr_matrix | None = None
    boundary: sp.csr_matrix | None = None
    conv: sp.csr_matrix | None = None


class FlatChannelAssembler:
    """Element integrals for the Q2-Q1 pair on the deformed flat channel."""

    def __init__(self, mesh: ReferenceMesh, geom: ReferenceGeometry, space: MixedSpace | None = None,
                 quad_order: int = 6, density: float = 1.0, viscosity: float = 1.0):
        if not geom.is_flat:
            raise ConfigurationError("moving-domain assembly is implemented for the flat channel")
        if quad_order < 4:
            raise ConfigurationError("moving-domain forms need quadrature of exactness at least 4")
        self.mesh, self.geom = mesh, geom
        self.space = space or MixedSpace(mesh)
        self.gspace = GeometrySpace(mesh)
        self.density, self.viscosity = density, viscosity
        ng = quad_order // 2 + 1
        t, w = gauss_unit(ng)
        xi, et = np.meshgrid(t, t, indexing="xy")
        xi, et = xi.ravel(), et.ravel()
        self.wloc = np.outer(w, w).ravel()
        self.N, dNloc = q2_shape(xi, et)
        self.Np = q1_shape(xi, et)
        hx, hy = mesh.hx, mesh.hy
        self.X = np.stack([mesh.origin[:, 0, None] + hx[:, None] * xi[None, :],
                           mesh.origin[:, 1, None] + hy[:, None] * et[None, :]], axis=-1)
        self.W = (hx * hy)[:, None] * self.wloc[None, :]
        scale = np.stack([1.0 / hx, 1.0 / hy], axis=-1)
        self.dN = dNloc[None, :, :, :] * scale[:, None, None, :]
        x1 = self.X[..., 0].ravel()
        self._B = [self.gspace.matrix(x1, d) for d in range(3)]
        # top edge rule (the reference shell)
        top = mesh.edge_tag("M")
        self.top_elems = top
        self.top_t, self.top_w = t, w
        self.Ntop, _ = q2_shape(t, np.ones_like(t))
        self.top_x = mesh.origin[top, 0, None] + mesh.hx[top, None] * t[None, :]
        self.top_W = mesh.hx[top, None] * w[None, :]
        self._Btop = [self.gspace.matrix(self.top_x.ravel(), d) for d in range(3)]
        edofs = self.space.elem_udofs
        self._rows = np.repeat(edofs, 18, axis=1).ravel()
        self._cols = np.tile(edofs, (1, 18)).ravel()
        tdofs = edofs[top]
        self._trows = np.repeat(tdofs, 18, axis=1).ravel()
        self._tcols = np.tile(tdofs, (1, 18)).ravel()
        self._div_ref = None

    # ------------------------------------------------------------------
    def _mat(self, local: np.ndarray, top: bool = False) -> sp.csr_matrix:
        n = self.space.n_u
        if top:
            return sp.coo_matrix((local.ravel(), (self._trows, self._tcols)), shape=(n, n)).tocsr()
        return sp.coo_matrix((local.ravel(), (self._rows, self._cols)), shape=(n, n)).tocsr()

    def _vec(self, local: np.ndarray) -> np.ndarray:
        out = np.zeros(self.space.n_u)
        np.add.at(out, self.space.elem_udofs.ravel(), local.ravel())
        return out

    def displacement_at_points(self, coeffs, rate=None):
        shape = self.X.shape[:2]
        d = tuple((B @ coeffs).reshape(shape) for B in self._B)
        ddot = None if rate is None else tuple((B @ rate).reshape(shape) for B in self._B[:2])
        return d, ddot

    def kinematics(self, g: GeometryState, with_rate: bool = True) -> dict:
        d, ddot = self.displacement_at_points(g.coeffs, g.rate if with_rate else None)
        kin = flat_kinematics(self.geom, self.X[..., 1], d, ddot)
        if np.min(kin["J"]) <= 0.0:
            raise AdmissibilityError("Hanzawa Jacobian is not positive at some quadrature node")
        F = kin["F"]
        J = kin["J"]
        Finv = np.empty_like(F)
        Finv[..., 0, 0], Finv[..., 1, 1] = F[..., 1, 1] / J, F[..., 0, 0] / J
        Finv[..., 0, 1], Finv[..., 1, 0] = -F[..., 0, 1] / J, -F[..., 1, 0] / J
        kin["Finv"] = Finv
        kin["x"] = self.X + kin["beta"][..., None] * np.stack([np.zeros_like(J), d[0]], axis=-1)
        return kin

    def physical_points(self, g: GeometryState) -> np.ndarray:
        d, _ = self.displacement_at_points(g.coeffs)
        b = self.geom.beta_hat(self.X[..., 1] - self.geom.height)
        return self.X + np.stack([np.zeros_like(b), d[0] * b], axis=-1)

    def dof_fields(self, kin: dict, with_time: bool = False):
        """Piola images of the 18 element basis functions at every quadrature point.

        Returns V (e, q, k, i), the physical gradient (e, q, k, i, j) and, on
        request, the time derivative at fixed reference point.
        """
        F, dF, J, dJ, Finv = kin["F"], kin["dF"], kin["J"], kin["dJ"], kin["Finv"]
        G = F / J[..., None, None]
        dG = (dF * J[..., None, None, None] - F[..., None] * dJ[..., None, None, :]) / (J**2)[..., None, None, None]
        N, dN = self.N, self.dN
        nel, nq = J.shape
        V = np.empty((nel, nq, 18, 2))
        gX = np.empty((nel, nq, 18, 2, 2))
        for c in range(2):
            sl = slice(9 * c, 9 * c + 9)
            V[:, :, sl, :] = G[:, :, None, :, c] * N[None, :, :, None]
            gX[:, :, sl] = (dG[:, :, None, :, c, :] * N[None, :, :, None, None]
                            + G[:, :, None, :, c, None] * dN[:, :, :, None, :])
        gx = np.einsum("eqkim,eqmj->eqkij", gX, Finv)
        if not with_time:
            return V, gx, None
        Fd = kin["dPsi_dot"]
        Jd = Fd[..., 0, 0] * F[..., 1, 1] + F[..., 0, 0] * Fd[..., 1, 1] \
            - Fd[..., 0, 1] * F[..., 1, 0] - F[..., 0, 1] * Fd[..., 1, 0]
        Gd = (Fd * J[..., None, None] - F * Jd[..., None, None]) / (J**2)[..., None, None]
        dV = np.empty_like(V)
        for c in range(2):
            sl = slice(9 * c, 9 * c + 9)
            dV[:, :, sl, :] = Gd[:, :, None, :, c] * N[None, :, :, None]
        return V, gx, dV

    # ------------------------------------------------------------------
    def divergence_reference(self, mask: np.ndarray | None = None) -> sp.csr_matrix:
        """Reference divergence pairing; ``mask`` (per element, 0/1) restricts the integral."""
        if mask is None and self._div_ref is not None:
            return self._div_ref
        wq = self.W if mask is None else self.W * mask[:, None]
        loc = np.concatenate([np.einsum("eqa,qm,eq->ema", self.dN[..., 0], self.Np, wq),
                              np.einsum("eqa,qm,eq->ema", self.dN[..., 1], self.Np, wq)], axis=2)
        rows = np.repeat(self.space.elem_pdofs, 18, axis=1).ravel()
        cols = np.tile(self.space.elem_udofs, (1, 4)).ravel()
        D = sp.coo_matrix((loc.ravel(), (rows, cols)), shape=(self.space.n_p, self.space.n_u)).tocsr()
        if mask is None:
            self._div_ref = D
        return D

    def divergence_moving(self, kin: dict, fields=None) -> sp.csr_matrix:
        """Divergence pairing assembled on the physical configuration (check path)."""
        V, gx, _ = fields if fields is not None else self.dof_fields(kin)
        wJ = self.W * kin["J"]
        div = np.trace(gx, axis1=3, axis2=4)
        loc = np.einsum("eqk,qm,eq->emk", div, self.Np, wJ)
        rows = np.repeat(self.space.elem_pdofs, 18, axis=1).ravel()
        cols = np.tile(self.space.elem_udofs, (1, 4)).ravel()
        return sp.coo_matrix((loc.ravel(), (rows, cols)), shape=(self.space.n_p, self.space.n_u)).tocsr()

    def mass(self, kin, fields) -> sp.csr_matrix:
        V = fields[0]
        wJ = self.density * self.W * kin["J"]
        return self._mat(_gram(V, V, wJ))

    def viscous(self, kin, fields, mask: np.ndarray | None = None) -> sp.csr_matrix:
        gx = fields[1]
        D = 0.5 * (gx + np.swapaxes(gx, 3, 4))
        wJ = 2.0 * self.viscosity * self.W * kin["J"]
        if mask is not None:
            wJ = wJ * mask[:, None]
        return self._mat(_gram(D, D, wJ))

    def rate(self, kin, fields) -> sp.csr_matrix:
        """Matrix of ``rho int (d/dt W_k) . W_j`` with the time derivative in Eulerian form."""
        V, gx, dV = fields
        A = dV - np.einsum("eqkij,eqj->eqki", gx, kin["Psi_dot"])
        wJ = self.density * self.W * kin["J"]
        return self._mat(_gram(V, A, wJ))

    def convection(self, kin, fields, v_at_points: np.ndarray) -> sp.csr_matrix:
        """Antisymmetric split ``rho/2 [((v.grad) W_k).W_j - ((v.grad) W_j).W_k]``."""
        V, gx, _ = fields
        T = np.einsum("eqkij,eqj->eqki", gx, v_at_points)
        wJ = 0.5 * self.density * self.W * kin["J"]
        A = _gram(V, T, wJ)
        return self._mat(A - np.swapaxes(A, 1, 2))

    def boundary_rate(self, g: GeometryState, gamma: Callable | None = None) -> sp.csr_matrix:
        """Reynolds term ``rho int_M (W_j . W_k) delta_t gamma(delta) dq``."""
        shape = self.top_x.shape
        d = tuple((B @ g.coeffs).reshape(shape) for B in self._Btop)
        ddot = (self._Btop[0] @ g.rate).reshape(shape)
        kin = flat_kinematics(self.geom, np.full(shape, self.geom.height), d)
        G = kin["F"] / kin["J"][..., None, None]
        Vt = np.empty(shape + (18, 2))
        for c in range(2):
            Vt[:, :, 9 * c:9 * c + 9, :] = G[:, :, None, :, c] * self.Ntop[None, :, :, None]
        gam = np.ones(shape) if gamma is None else gamma(self.top_x, d[0])
        w = self.density * self.top_W * ddot * gam
        return self._mat(_gram(Vt, Vt, w), top=True)

    def load(self, kin, fields, f_at_points: np.ndarray) -> np.ndarray:
        V = fields[0]
        wJ = self.W * kin["J"]
        return self._vec(np.einsum("eqki,eqi,eq->ek", V, f_at_points, wJ))

    def l2_norm_points(self, kin, values: np.ndarray) -> float:
        return float(np.sqrt(np.sum((values * values).sum(axis=-1) * self.W * kin["J"])))

    def integrate(self, kin, values: np.ndarray) -> float:
        return float(np.sum(values * self.W * kin["J"]))

    def velocity_at_points(self, u: np.ndarray, fields) -> np.ndarray:
        """Physical velocity of coefficient vector ``u`` at the quadrature points."""
        V = fields[0]
        return np.einsum("eqki,ek->eqi", V, u[self.space.elem_udofs])

    def velocity_gradient_at_points(self, u: np.ndarray, fields) -> np.ndarray:
        return np.einsum("eqkij,ek->eqij", fields[1], u[self.space.elem_udofs])

    def trace_matrix(self, q: np.ndarray) -> sp.csr_matrix:
        """Rows (2 per point, components stacked) evaluating reference traces on ``y = H``."""
        mesh = self.mesh
        X = np.column_stack([q, np.full_like(q, self.geom.height)])
        e, xi, et = mesh.locate(X)
        N, _ = q2_shape(xi, et)
        dofs = self.space.elem_udofs[e]
        n = len(q)
        rows = np.concatenate([np.repeat(np.arange(n), 9), np.repeat(np.arange(n, 2 * n), 9)])
        cols = np.concatenate([dofs[:, :9].ravel(), dofs[:, 9:].ravel()])
        vals = np.concatenate([N.ravel(), N.ravel()])
        return sp.coo_matrix((vals, (rows, cols)), shape=(2 * n, self.space.n_u)).tocsr()

    def assemble(self, g: GeometryState, v_at_points: np.ndarray | None = None, with_rate: bool = True,
                 gamma: Callable | None = None) -> tuple[OperatorSet, dict, tuple]:
        kin = self.kinematics(g, with_rate=with_rate)
        fields = self.dof_fields(kin, with_time=with_rate)
        ops = OperatorSet(mass=self.mass(kin, fields), visc=self.viscous(kin, fields),
                          div=self.divergence_reference())
        if with_rate:
            ops.rate = self.rate(kin, fields)
            ops.boundary = self.boundary_rate(g, gamma)
        if v_at_points is not None:
            ops.conv = self.convection(kin, fields, v_at_points)
        return ops, kin, fields


def assemble_moving_forms(mesh: ReferenceMesh, space: MixedSpace, geom: ReferenceGeometry, eta, eta_rate=None,
                          v: Callable | None = None, quad_order: int = 6, density: float = 1.0,
                          viscosity: float = 1.0) -> OperatorSet:
    """Operator set on the domain deformed by the profile ``eta`` (fitted to the geometry splines).

    ``v`` is an optional callable of physical points (..., 2) giving the frozen
    transport velocity of the convective split.
    """
    asm = FlatChannelAssembler(mesh, geom, space, quad_order, density, viscosity)
    gs = asm.gspace
    c = gs.fit(eta)
    r = gs.fit(eta_rate) if eta_rate is not None else np.zeros_like(c)
    g = GeometryState(c, r)
    vq = None
    if v is not None:
        vq = np.asarray(v(asm.physical_points(g)), dtype=float)
    ops, _, _ = asm.assemble(g, vq)
    return ops
