"""Discrete setting shared by every coupled run: mesh, spaces, shell basis, extension."""
from __future__ import annotations

from functools import cached_property

import numpy as np

from ..config import RunConfig
from ..discretization import (BoundarySpec, FlatChannelAssembler, GeometryState, MixedSpace,
                              channel_mesh)
from ..extension import StokesLift, extension_matrix
from ..geometry import channel_geometry
from ..shell import KoiterMaterial, build_shell_basis


class FlowModel:
    """Everything that depends on the configuration but not on the data."""

    def __init__(self, cfg: RunConfig):
        self.cfg = cfg
        self.geom = channel_geometry(cfg.length, cfg.height, cfg.kappa, cfg.alpha)
        self.mesh = channel_mesh(self.geom, cfg.nx, cfg.ny_lower, cfg.ny_upper)
        self.space = MixedSpace(self.mesh)
        self.bc = BoundarySpec(cfg.inlet, cfg.outlet, cfg.bottom)
        self.material = KoiterMaterial(cfg.lame_lambda, cfg.lame_mu, cfg.thickness_half, cfg.shell_density)
        self.asm = FlatChannelAssembler(self.mesh, self.geom, self.space, cfg.quad_order,
                                        cfg.density, cfg.viscosity)
        self.gspace = self.asm.gspace
        self.shell = self._shell_basis()
        self.shell_mass = self.material.inertia * self.shell.mass
        self.shell_stiffness = self.shell.stiffness(self.material)
        nv = self.mesh.n_vnodes
        top = self.mesh.vnode_tag("M")
        self.top_nodes = top[np.argsort(self.mesh.vcoords[top, 0])]
        self.top_x = self.mesh.vcoords[self.top_nodes, 0]
        self.top_u1 = self.top_nodes
        self.top_u2 = self.top_nodes + nv
        self.top_values = self.shell.eval(self.top_x)
        self.sample_q = np.linspace(0.0, self.geom.length, 8 * cfg.nx + 1)
        self.sample_values = self.shell.eval(self.sample_q)

    def _shell_basis(self):
        cfg = self.cfg
        kind = cfg.shell_basis
        if kind == "quadratic-bsplines-clamped":
            # knots on the mesh columns make every shell mode an exact Q2 trace
            full = build_shell_basis(self.geom, 1, kind, cfg.shell_quad_order, breaks=self.mesh.xnodes)
            n = cfg.n_shell_modes or full.n_modes
            if n >= full.n_modes:
                return full
            return build_shell_basis(self.geom, 1, kind, cfg.shell_quad_order, breaks=self.mesh.xnodes,
                                     material=self.material, n_ritz=n)
        n = cfg.n_shell_modes or 12
        return build_shell_basis(self.geom, n, kind, cfg.shell_quad_order, material=self.material)

    @cached_property
    def lift(self) -> StokesLift:
        return StokesLift(self.geom, self.mesh, self.space, viscosity=1.0)

    @cached_property
    def extension(self) -> np.ndarray:
        """Nodal vectors of the reference extensions of the shell modes (one column each)."""
        return extension_matrix(self.lift, self.shell)

    def geometry_fit(self, values_or_profile) -> np.ndarray:
        return self.gspace.fit(values_or_profile)

    def geometry_state(self, coeffs, rate=None) -> GeometryState:
        c = np.asarray(coeffs, dtype=float)
        return GeometryState(c, np.zeros_like(c) if rate is None else np.asarray(rate, dtype=float))

    def shell_sup(self, coeffs) -> float:
        return float(np.max(np.abs(self.sample_values @ coeffs))) if len(coeffs) else 0.0

    def counts(self) -> dict:
        return {"elements": self.mesh.n_elements, "velocity_dofs": self.space.n_u,
                "pressure_dofs": self.space.n_p, "shell_modes": self.shell.n_modes}
