"""Structured quadrilateral meshes and the Q2-Q1 degree-of-freedom layout."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import ConfigurationError

BOUNDARY_TAGS = ("M", "inlet", "outlet", "bottom")


def _lagrange_1d_q2(t, der=0):
    t = np.asarray(t, dtype=float)
    if der == 0:
        return np.stack([2 * (t - 0.5) * (t - 1), -4 * t * (t - 1), 2 * t * (t - 0.5)], axis=-1)
    return np.stack([4 * t - 3, -8 * t + 4, 4 * t - 1], axis=-1)


def _lagrange_1d_q1(t, der=0):
    t = np.asarray(t, dtype=float)
    if der == 0:
        return np.stack([1 - t, t], axis=-1)
    return np.stack([-np.ones_like(t), np.ones_like(t)], axis=-1)


def q2_shape(xi, eta):
    """Values (N, 9) and local gradients (N, 9, 2) of Q2; local index 3*b + a."""
    lx, ly = _lagrange_1d_q2(xi), _lagrange_1d_q2(eta)
    dx, dy = _lagrange_1d_q2(xi, 1), _lagrange_1d_q2(eta, 1)
    N = (ly[:, :, None] * lx[:, None, :]).reshape(-1, 9)
    gx = (ly[:, :, None] * dx[:, None, :]).reshape(-1, 9)
    gy = (dy[:, :, None] * lx[:, None, :]).reshape(-1, 9)
    return N, np.stack([gx, gy], axis=-1)


def q1_shape(xi, eta):
    lx, ly = _lagrange_1d_q1(xi), _lagrange_1d_q1(eta)
    return (ly[:, :, None] * lx[:, None, :]).reshape(-1, 4)


@dataclass
class ReferenceMesh:
    """Tensor grid on ``[x0, x1] x [y0, y1]`` given by its breakpoints."""

    xnodes: np.ndarray
    ynodes: np.ndarray
    nx: int = field(init=False)
    ny: int = field(init=False)

    def __post_init__(self):
        self.xnodes = np.asarray(self.xnodes, dtype=float)
        self.ynodes = np.asarray(self.ynodes, dtype=float)
        if np.any(np.diff(self.xnodes) <= 0) or np.any(np.diff(self.ynodes) <= 0):
            raise ConfigurationError("mesh breakpoints must be strictly increasing")
        self.nx, self.ny = len(self.xnodes) - 1, len(self.ynodes) - 1
        ix, iy = np.meshgrid(np.arange(self.nx), np.arange(self.ny), indexing="xy")
        self.elem_ix, self.elem_iy = ix.ravel(), iy.ravel()
        self.hx = np.diff(self.xnodes)[self.elem_ix]
        self.hy = np.diff(self.ynodes)[self.elem_iy]
        self.origin = np.column_stack([self.xnodes[self.elem_ix], self.ynodes[self.elem_iy]])
        # Q2 node grid: breakpoints plus midpoints
        self.xv = np.empty(2 * self.nx + 1)
        self.xv[::2], self.xv[1::2] = self.xnodes, 0.5 * (self.xnodes[1:] + self.xnodes[:-1])
        self.yv = np.empty(2 * self.ny + 1)
        self.yv[::2], self.yv[1::2] = self.ynodes, 0.5 * (self.ynodes[1:] + self.ynodes[:-1])
        nvx = 2 * self.nx + 1
        a = np.arange(3)
        self.elem_vnodes = ((2 * self.elem_iy[:, None, None] + a[None, :, None]) * nvx
                            + 2 * self.elem_ix[:, None, None] + a[None, None, :]).reshape(-1, 9)
        npx = self.nx + 1
        b = np.arange(2)
        self.elem_pnodes = ((self.elem_iy[:, None, None] + b[None, :, None]) * npx
                            + self.elem_ix[:, None, None] + b[None, None, :]).reshape(-1, 4)
        VX, VY = np.meshgrid(self.xv, self.yv, indexing="xy")
        self.vcoords = np.column_stack([VX.ravel(), VY.ravel()])
        PX, PY = np.meshgrid(self.xnodes, self.ynodes, indexing="xy")
        self.pcoords = np.column_stack([PX.ravel(), PY.ravel()])

    @property
    def n_elements(self) -> int:
        return self.nx * self.ny

    @property
    def n_vnodes(self) -> int:
        return len(self.xv) * len(self.yv)

    @property
    def n_pnodes(self) -> int:
        return len(self.xnodes) * len(self.ynodes)

    @property
    def areas(self) -> np.ndarray:
        return self.hx * self.hy

    def vnode_tag(self, tag: str) -> np.ndarray:
        """Velocity nodes on the closed boundary segment ``tag``."""
        nvx, nvy = len(self.xv), len(self.yv)
        grid = np.arange(nvx * nvy).reshape(nvy, nvx)
        return {"M": grid[-1, :], "bottom": grid[0, :], "inlet": grid[:, 0], "outlet": grid[:, -1]}[tag].copy()

    def edge_tag(self, tag: str) -> np.ndarray:
        """Element ids whose side lies on ``tag`` (edges partition the boundary)."""
        e = np.arange(self.n_elements)
        sel = {"M": self.elem_iy == self.ny - 1, "bottom": self.elem_iy == 0,
               "inlet": self.elem_ix == 0, "outlet": self.elem_ix == self.nx - 1}[tag]
        return e[sel]

    def locate(self, X: np.ndarray):
        """Element ids and local coordinates in [0, 1]^2 of reference points."""
        X = np.asarray(X, dtype=float).reshape(-1, 2)
        ix = np.clip(np.searchsorted(self.xnodes, X[:, 0], side="right") - 1, 0, self.nx - 1)
        iy = np.clip(np.searchsorted(self.ynodes, X[:, 1], side="right") - 1, 0, self.ny - 1)
        xi = (X[:, 0] - self.xnodes[ix]) / (self.xnodes[ix + 1] - self.xnodes[ix])
        et = (X[:, 1] - self.ynodes[iy]) / (self.ynodes[iy + 1] - self.ynodes[iy])
        return iy * self.nx + ix, xi, et


def rectangle_mesh(length: float, height: float, nx: int, ny: int) -> ReferenceMesh:
    return ReferenceMesh(np.linspace(0.0, length, nx + 1), np.linspace(0.0, height, ny + 1))


def _graded(points: list[float], n: int) -> np.ndarray:
    """``n`` (or more) cells over the breakpoints ``points``, spread by segment length."""
    lens = np.diff(points)
    counts = np.maximum(1, np.round(n * lens / lens.sum()).astype(int))
    return np.unique(np.concatenate([np.linspace(a, b, c + 1) for a, b, c in zip(points[:-1], points[1:], counts)]))


def channel_mesh(geom, nx: int = 16, ny_lower: int = 7, ny_upper: int = 3) -> ReferenceMesh:
    """Mesh of the reference channel.

    Horizontal grid lines sit on the inner tube boundary ``y = H - alpha`` and
    on the two kinks of the cutoff, so every moving-domain integrand is smooth
    inside each element.
    """
    H, a, k = geom.height, geom.alpha, geom.kappa
    kinks = [H + k * geom.cutoff.lower, H + k * geom.cutoff.upper]
    lower = sorted({0.0, H - a, *[v for v in kinks if 0.0 < v < H - a]})
    upper = sorted({H - a, H, *[v for v in kinks if H - a < v < H]})
    y = np.unique(np.concatenate([_graded(lower, ny_lower), _graded(upper, ny_upper)]))
    return ReferenceMesh(np.linspace(0.0, geom.length, nx + 1), y)


@dataclass(frozen=True)
class BoundarySpec:
    """Boundary condition per fixed segment: ``"natural"`` or ``"no-slip"``."""

    inlet: str = "natural"
    outlet: str = "natural"
    bottom: str = "natural"

    def __post_init__(self):
        for name in ("inlet", "outlet", "bottom"):
            if getattr(self, name) not in ("natural", "no-slip"):
                raise ConfigurationError(f"boundary condition for {name} must be 'natural' or 'no-slip'")

    def no_slip(self) -> list[str]:
        return [n for n in ("inlet", "outlet", "bottom") if getattr(self, n) == "no-slip"]

    @property
    def all_dirichlet(self) -> bool:
        return len(self.no_slip()) == 3


class MixedSpace:
    """Continuous Q2 velocity (component-major numbering) and Q1 pressure."""

    def __init__(self, mesh: ReferenceMesh):
        self.mesh = mesh
        nv = mesh.n_vnodes
        self.n_u = 2 * nv
        self.n_p = mesh.n_pnodes
        self.elem_udofs = np.concatenate([mesh.elem_vnodes, mesh.elem_vnodes + nv], axis=1)
        self.elem_pdofs = mesh.elem_pnodes

    def udofs(self, tag: str, component: int | None = None) -> np.ndarray:
        nodes = self.mesh.vnode_tag(tag)
        nv = self.mesh.n_vnodes
        if component is None:
            return np.concatenate([nodes, nodes + nv])
        return nodes + component * nv

    def dirichlet_dofs(self, bc: BoundarySpec) -> np.ndarray:
        parts = [self.udofs(t) for t in bc.no_slip()]
        return np.unique(np.concatenate(parts)) if parts else np.zeros(0, dtype=int)

    def interpolate(self, fn) -> np.ndarray:
        """Nodal interpolant of a vector field ``fn(points) -> (N, 2)``."""
        v = np.asarray(fn(self.mesh.vcoords), dtype=float)
        return np.concatenate([v[:, 0], v[:, 1]])

    def evaluate(self, u: np.ndarray, X: np.ndarray, grad: bool = False):
        """Velocity (and reference gradient) of coefficient vector ``u`` at reference points."""
        mesh = self.mesh
        e, xi, et = mesh.locate(X)
        N, dN = q2_shape(xi, et)
        dofs = self.elem_udofs[e]
        ue = u[dofs].reshape(-1, 2, 9)
        vals = np.einsum("nca,na->nc", ue, N)
        if not grad:
            return vals
        scale = np.column_stack([1.0 / mesh.hx[e], 1.0 / mesh.hy[e]])
        g = np.einsum("nca,naj->ncj", ue, dN * scale[:, None, :])
        return vals, g

    def evaluate_pressure(self, p: np.ndarray, X: np.ndarray) -> np.ndarray:
        e, xi, et = self.mesh.locate(X)
        return np.einsum("na,na->n", p[self.elem_pdofs[e]], q1_shape(xi, et))
