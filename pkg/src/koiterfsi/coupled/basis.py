"""Coupled shell/fluid Galerkin basis.

Each unknown of the coupled system owns a pair (shell velocity, fluid
velocity).  Shell-lifted pairs carry a shell mode together with a fluid field
whose trace on the shell is that mode times the normal; interior pairs have
no shell part and a fluid field vanishing on the shell.

Two realizations are available.  The saddle path keeps every velocity
degree of freedom off the shell as an unknown and imposes the divergence
constraint with a pressure multiplier.  The modal path uses the extension of
the shell modes plus an explicit basis of the discretely divergence-free
fields, so no multiplier is needed.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as la
import scipy.sparse as sp

from ..discretization import GeometryState, divfree_nullspace
from ..errors import AdmissibilityError, ConfigurationError
from ..geometry import flat_kinematics
from .model import FlowModel


@dataclass
class CoupledBasis:
    path: str
    Pf: object                 # reference velocity dofs x unknowns (sparse or dense)
    Ps: np.ndarray             # shell modes x unknowns
    constraint: sp.csr_matrix | None
    kind: np.ndarray           # 1 for shell-lifted pairs, 2 for interior pairs
    pin_pressure: int | None = None

    @property
    def n(self) -> int:
        return self.Ps.shape[1]

    def fluid(self, z) -> np.ndarray:
        return np.asarray(self.Pf @ z).ravel()

    def shell(self, z) -> np.ndarray:
        return self.Ps @ z

    def project(self, A) -> object:
        """``Pf^T A Pf`` in the storage matching the path."""
        if self.path == "saddle":
            return (self.Pf.T @ sp.csr_matrix(A) @ self.Pf).tocsr()
        return self.Pf.T @ (sp.csr_matrix(A) @ self.Pf)

    def project_vector(self, b) -> np.ndarray:
        return np.asarray(self.Pf.T @ b).ravel()


def _shell_trace_block(model: FlowModel) -> sp.csr_matrix:
    """Reference velocity dofs on the shell as a function of shell coefficients."""
    Y = model.top_values
    rows = np.repeat(model.top_u2, Y.shape[1])
    cols = np.tile(np.arange(Y.shape[1]), Y.shape[0])
    return sp.coo_matrix((Y.ravel(), (rows, cols)), shape=(model.space.n_u, Y.shape[1])).tocsr()


def build_coupled_basis(model: FlowModel, path: str | None = None, n_fluid_modes: int | None = None,
                        max_dofs: int = 4000) -> CoupledBasis:
    path = path or model.cfg.path
    n_fluid_modes = model.cfg.n_fluid_modes if n_fluid_modes is None else n_fluid_modes
    space, ns = model.space, model.shell.n_modes
    fixed = np.union1d(space.udofs("M"), space.dirichlet_dofs(model.bc))
    div = model.asm.divergence_reference()
    if path == "saddle":
        free = np.setdiff1d(np.arange(space.n_u), fixed)
        sel = sp.coo_matrix((np.ones(free.size), (free, np.arange(free.size))),
                            shape=(space.n_u, free.size)).tocsr()
        Pf = sp.hstack([sel, _shell_trace_block(model)]).tocsr()
        Ps = np.hstack([np.zeros((ns, free.size)), np.eye(ns)])
        D = (div @ Pf).tocsr()
        kind = np.concatenate([np.full(free.size, 2), np.ones(ns, dtype=int)])
        # one pressure is pinned only if constants are invisible to the constraint
        null_const = np.max(np.abs(D.T @ np.ones(D.shape[0]))) < 1e-12
        return CoupledBasis("saddle", Pf, Ps, D, kind, 0 if null_const else None)
    if path != "modal":
        raise ConfigurationError(f"unknown Galerkin path {path!r}")
    if model.bc.bottom == "no-slip":
        raise ConfigurationError("the modal path needs a natural bottom (the extension compensates there)")
    E = model.extension
    if n_fluid_modes == 0:
        X = np.zeros((space.n_u, 0))
    else:
        X = divfree_nullspace(space, div, model.bc, max_dofs=max_dofs)
        if X.shape[1]:
            # order the interior fields by their Stokes eigenvalue
            kin = model.asm.kinematics(GeometryState.zero(model.gspace), with_rate=False)
            fields = model.asm.dof_fields(kin)
            A = model.asm.viscous(kin, fields)
            M = model.asm.mass(kin, fields) if model.cfg.density > 0 else None
            Ar = X.T @ (A @ X)
            Mr = X.T @ (M @ X) if M is not None else np.eye(X.shape[1])
            lam, V = la.eigh(0.5 * (Ar + Ar.T), 0.5 * (Mr + Mr.T))
            X = X @ V
            if n_fluid_modes > 0:
                X = X[:, :n_fluid_modes]
    Pf = np.hstack([E, X])
    Ps = np.hstack([np.eye(ns), np.zeros((ns, X.shape[1]))])
    kind = np.concatenate([np.ones(ns, dtype=int), np.full(X.shape[1], 2)])
    return CoupledBasis("modal", Pf, Ps, None, kind)


def boundary_factor(model: FlowModel, g: GeometryState, x=None) -> np.ndarray:
    """``g = dPsi nu . nu`` on the shell; the normal is only rescaled by the transform."""
    x = model.top_x if x is None else x
    prof = model.gspace.profile(g.coeffs)
    d = tuple(prof.eval(x, k) for k in range(3))
    kin = flat_kinematics(model.geom, np.full(x.shape, model.geom.height), d)
    fac = kin["F"][..., 1, 1]
    if np.min(np.abs(fac)) <= 0.0:
        raise AdmissibilityError("boundary transport factor vanishes: degenerate transport")
    return fac


def trace_residual_fields(model: FlowModel, U: np.ndarray, A: np.ndarray, g: GeometryState) -> float:
    """``max |tr u - a nu|`` at the shell nodes for reference velocities ``U`` and shell velocities ``A``.

    Columns of ``U`` (velocity dofs x k) pair with columns of ``A`` (shell modes x k).
    """
    x = model.top_x
    prof = model.gspace.profile(g.coeffs)
    d = tuple(prof.eval(x, k) for k in range(3))
    kin = flat_kinematics(model.geom, np.full(x.shape, model.geom.height), d)
    F, J = kin["F"], kin["J"]
    U = np.asarray(U, dtype=float).reshape(model.space.n_u, -1)
    u1, u2 = U[model.top_u1], U[model.top_u2]
    p1 = (F[:, 0, 0, None] * u1 + F[:, 0, 1, None] * u2) / J[:, None]
    p2 = (F[:, 1, 0, None] * u1 + F[:, 1, 1, None] * u2) / J[:, None]
    shell = model.top_values @ np.asarray(A, dtype=float).reshape(model.shell.n_modes, -1)
    gfac = F[:, 1, 1] / J
    return float(max(np.max(np.abs(p1)), np.max(np.abs(p2 - gfac[:, None] * shell))))


def trace_residual(model: FlowModel, basis: CoupledBasis, g: GeometryState, z=None) -> float:
    """Physical trace residual of the coupled pairs at the shell nodes.

    For ``z = None`` every basis pair is tested and the worst mode is returned.
    """
    Z = np.eye(basis.n) if z is None else np.asarray(z, dtype=float)[:, None]
    return trace_residual_fields(model, np.asarray(basis.Pf @ Z), basis.Ps @ Z, g)


def divergence_residual(model: FlowModel, basis: CoupledBasis, z=None) -> float:
    div = model.asm.divergence_reference()
    Z = np.eye(basis.n) if z is None else np.asarray(z, dtype=float)[:, None]
    return float(np.max(np.abs(div @ np.asarray(basis.Pf @ Z)))) if basis.n else 0.0
