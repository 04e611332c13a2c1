"""Saddle-point solves, constraint elimination and divergence-free subspaces."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as la
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from ..errors import SizeError, SolverFailure
from ..quadrature import gauss_unit
from .mesh import BoundarySpec, MixedSpace, q1_shape

DENSE_LIMIT = 4000


@dataclass
class SaddleResult:
    u: np.ndarray
    p: np.ndarray
    z: np.ndarray
    residual: float


def selection_map(n: int, fixed: np.ndarray) -> sp.csr_matrix:
    """Prolongation from the free entries of a length-``n`` vector."""
    free = np.setdiff1d(np.arange(n), fixed)
    return sp.coo_matrix((np.ones(free.size), (free, np.arange(free.size))), shape=(n, free.size)).tocsr()


def solve_saddle(A, D, b, P=None, u_fixed=None, g=None, pin_pressure: int | None = None,
                 rtol: float = 1e-10) -> SaddleResult:
    """Solve ``A u + D^T p = b``, ``D u = g`` over ``u = P z + u_fixed``.

    Constraints enter by elimination: ``P`` spans the admissible directions
    and ``u_fixed`` carries the prescribed values.  ``pin_pressure`` removes
    one pressure unknown when the pressure is only determined up to a constant.
    """
    A = sp.csr_matrix(A)
    D = sp.csr_matrix(D)
    n = A.shape[0]
    P = sp.identity(n, format="csr") if P is None else sp.csr_matrix(P)
    uf = np.zeros(n) if u_fixed is None else np.asarray(u_fixed, dtype=float)
    np_ = D.shape[0]
    gv = np.zeros(np_) if g is None else np.asarray(g, dtype=float)
    K = (P.T @ A @ P).tocsr()
    B = (D @ P).tocsr()
    keep = np.arange(np_) if pin_pressure is None else np.setdiff1d(np.arange(np_), [pin_pressure])
    B = B[keep]
    rhs = np.concatenate([P.T @ (b - A @ uf), (gv - D @ uf)[keep]])
    S = sp.bmat([[K, B.T], [B, None]], format="csc")
    if not np.any(rhs):
        z = np.zeros(K.shape[0])
        pk = np.zeros(keep.size)
        res = 0.0
    else:
        try:
            sol = spla.splu(S).solve(rhs)
        except RuntimeError as exc:
            raise SolverFailure(
                f"saddle system is singular ({exc}); check the inf-sup pair, the pressure pin "
                "and that the constraints do not conflict"
            ) from exc
        res = float(np.linalg.norm(S @ sol - rhs) / max(np.linalg.norm(rhs), 1e-300))
        if not np.all(np.isfinite(sol)) or res > rtol:
            raise SolverFailure(f"saddle solve residual {res:.3e} exceeds {rtol:.1e}")
        z, pk = sol[:K.shape[0]], sol[K.shape[0]:]
    p = np.zeros(np_)
    p[keep] = pk
    return SaddleResult(u=P @ z + uf, p=p, z=z, residual=res)


def divfree_nullspace(space: MixedSpace, div: sp.spmatrix, bc: BoundarySpec = BoundarySpec(),
                      tol: float = 1e-10, max_dofs: int = DENSE_LIMIT) -> np.ndarray:
    """Orthonormal columns spanning discretely divergence-free fields with zero trace on M."""
    fixed = np.union1d(space.udofs("M"), space.dirichlet_dofs(bc))
    free = np.setdiff1d(np.arange(space.n_u), fixed)
    if free.size > max_dofs:
        raise SizeError(
            f"dense null-space extraction on {free.size} unknowns exceeds the limit {max_dofs}; "
            "use the saddle-point path on this mesh"
        )
    Df = sp.csr_matrix(div)[:, free].toarray()
    Z = la.null_space(Df, rcond=1e-12)
    cols = np.zeros((space.n_u, Z.shape[1]))
    cols[free] = Z
    worst = float(np.max(np.abs(sp.csr_matrix(div) @ cols))) if Z.size else 0.0
    if worst > tol:
        raise SolverFailure(f"null-space column divergence {worst:.3e} exceeds {tol:.1e}")
    return cols


def pressure_mass(space: MixedSpace) -> sp.csr_matrix:
    mesh = space.mesh
    t, w = gauss_unit(3)
    xi, et = np.meshgrid(t, t, indexing="xy")
    Np = q1_shape(xi.ravel(), et.ravel())
    wl = np.outer(w, w).ravel()
    loc = np.einsum("qa,qb,q,e->eab", Np, Np, wl, mesh.areas)
    rows = np.repeat(space.elem_pdofs, 4, axis=1).ravel()
    cols = np.tile(space.elem_pdofs, (1, 4)).ravel()
    return sp.coo_matrix((loc.ravel(), (rows, cols)), shape=(space.n_p, space.n_p)).tocsr()


def inf_sup_constant(space: MixedSpace, h1_matrix: sp.spmatrix, div: sp.spmatrix,
                     fixed: np.ndarray, skip: int = 0) -> float:
    """Discrete inf-sup constant of the pair for the velocity norm given by ``h1_matrix``.

    Square root of the smallest eigenvalue of ``D A^{-1} D^T`` relative to the
    pressure mass matrix; ``fixed`` lists the velocity dofs held at zero and
    ``skip`` drops that many of the smallest eigenvalues (1 for the constant
    pressure mode of an enclosed flow).
    """
    free = np.setdiff1d(np.arange(space.n_u), fixed)
    A = sp.csc_matrix(h1_matrix)[free][:, free]
    Dt = sp.csr_matrix(div)[:, free].T.toarray()
    X = spla.splu(sp.csc_matrix(A)).solve(Dt)
    S = Dt.T @ X
    Mp = pressure_mass(space).toarray()
    lam = la.eigh(0.5 * (S + S.T), Mp, eigvals_only=True)
    return float(np.sqrt(max(lam[skip], 0.0)))
