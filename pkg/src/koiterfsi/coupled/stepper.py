"""One step of the regularized, decoupled and linearized Galerkin system.

The unknowns ``z`` are the coefficients of the coupled basis at the step
end.  The shell displacement ``d`` is carried along as an auxiliary state
updated by the same theta rule, which replaces the memory integral of the
displacement by an ordinary differential equation.

With ``theta = 1/2`` and the endpoint-averaged mass matrix the discrete
energy balances exactly except for the mismatch between the mass increment
and the assembled Reynolds terms, which is what the ledger reports as the
defect.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.sparse as sp

from ..discretization import GeometryState, solve_saddle
from ..errors import InvariantViolation, SolverFailure
from .basis import CoupledBasis, trace_residual
from .model import FlowModel

LEDGER_COLUMNS = ("t", "E_kin_fluid", "Dissipation_cum", "E_kin_shell", "E_koiter", "E_total",
                  "groenwall_envelope", "defect")
RESIDUAL_TOL = 1e-9


@dataclass
class StepState:
    t: float
    z: np.ndarray
    d: np.ndarray
    geometry: np.ndarray
    mass: object = None        # projected mass matrix on the current configuration
    pressure: np.ndarray | None = None


@dataclass
class EnergyLedger:
    """Energy bookkeeping; ``groenwall_envelope`` is the square of the bound on ``sqrt(E)``."""

    rows: list = field(default_factory=list)
    work: list = field(default_factory=list)

    def append(self, t, ekf, diss, eks, ekoi, envelope_sqrt, work_cum):
        etot = ekf + diss + eks + ekoi
        e0 = self.rows[0][5] if self.rows else etot
        self.rows.append((t, ekf, diss, eks, ekoi, etot, envelope_sqrt ** 2, etot - e0 - work_cum))
        self.work.append(work_cum)

    def column(self, name: str) -> np.ndarray:
        return np.array([r[LEDGER_COLUMNS.index(name)] for r in self.rows])

    @property
    def E0(self) -> float:
        return self.rows[0][5]

    def groenwall_ratio(self) -> float:
        """``max_t sqrt(E(t)) / envelope(t)`` (1 means the bound is attained)."""
        e = np.sqrt(np.maximum(self.column("E_total"), 0.0))
        env = np.sqrt(self.column("groenwall_envelope"))
        with np.errstate(divide="ignore", invalid="ignore"):
            r = np.where(env > 0, e / env, np.where(e > 0, np.inf, 0.0))
        return float(np.max(r))

    def groenwall_ok(self, slack: float = 0.02, atol: float = 1e-14) -> bool:
        e = np.sqrt(np.maximum(self.column("E_total"), 0.0))
        env = np.sqrt(self.column("groenwall_envelope"))
        return bool(np.all(e <= (1.0 + slack) * env + atol))

    def drift_rate(self) -> float:
        """Largest rise of ``E`` above ``E(0)`` relative to ``E(0)``, per unit time."""
        t, e = self.column("t"), self.column("E_total")
        if self.E0 <= 0 or t[-1] <= 0:
            return 0.0 if np.all(e <= self.E0) else np.inf
        return float(max(0.0, np.max(e - self.E0)) / (self.E0 * t[-1]))

    def dissipation_monotone(self) -> bool:
        d = self.column("Dissipation_cum")
        return bool(np.all(np.diff(d) >= -1e-15 * max(1.0, abs(d[-1]))))

    def finite(self) -> bool:
        return bool(np.all(np.isfinite(np.array(self.rows, dtype=float))))

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(LEDGER_COLUMNS)
            for r in self.rows:
                w.writerow([repr(float(v)) for v in r])


def _dense_or_sparse(path, A):
    return sp.csr_matrix(A) if path == "saddle" else np.asarray(A.toarray() if sp.issparse(A) else A)


class LinearizedStepper:
    def __init__(self, model: FlowModel, basis: CoupledBasis, theta: float = 0.5,
                 residual_tol: float = RESIDUAL_TOL):
        self.model, self.basis, self.theta = model, basis, theta
        self.residual_tol = residual_tol
        Ps = sp.csr_matrix(basis.Ps)
        self.Ps = Ps
        self.Ms = model.shell_mass
        self.S = model.shell_stiffness
        self.Msz = _dense_or_sparse(basis.path, Ps.T @ sp.csr_matrix(self.Ms) @ Ps)
        self.Sz = _dense_or_sparse(basis.path, Ps.T @ sp.csr_matrix(self.S) @ Ps)
        self.div = model.asm.divergence_reference()
        shell = model.shell
        self._Yw = shell.values[0] * shell.quad_weights[:, None]
        cfg = model.cfg
        self._fscale = 0.0 if cfg.density == 0 else 1.0 / np.sqrt(2.0 * cfg.density)
        self._gscale = 1.0 / (2.0 * np.sqrt(model.material.thickness_half * model.material.density))
        self.last_residuals = (0.0, 0.0, 0.0)
        # without density and viscosity every fluid form vanishes identically
        self.fluid_inert = cfg.density == 0 and cfg.viscosity == 0

    # ------------------------------------------------------------------
    def fluid_mass(self, coeffs) -> object:
        if self.fluid_inert:
            return self.Msz.copy()
        asm = self.model.asm
        kin = asm.kinematics(GeometryState(coeffs, np.zeros_like(coeffs)), with_rate=False)
        M = asm.mass(kin, asm.dof_fields(kin))
        return self.basis.project(M) + self.Msz

    def energies(self, state: StepState) -> tuple[float, float, float]:
        a = self.basis.shell(state.z)
        M = state.mass
        ekf = 0.5 * float(state.z @ (M @ state.z)) - 0.5 * float(a @ self.Ms @ a)
        return ekf, 0.5 * float(a @ self.Ms @ a), 0.5 * float(state.d @ self.S @ state.d)

    def shell_load(self, gfun, t) -> np.ndarray:
        q = self.model.shell.quad_nodes
        return self.Ps.T @ (self._Yw.T @ gfun(t, q))

    def shell_force_norm(self, gfun, t) -> float:
        q, w = self.model.shell.quad_nodes, self.model.shell.quad_weights
        gv = gfun(t, q)
        return float(np.sqrt(np.sum(gv * gv * w)))

    def _solve(self, A, b) -> tuple[np.ndarray, np.ndarray | None, float]:
        basis = self.basis
        if basis.path == "saddle":
            res = solve_saddle(A, basis.constraint, b, pin_pressure=basis.pin_pressure)
            return res.u, res.p, res.residual
        if A.shape[0] == 0:
            return np.zeros(0), None, 0.0
        try:
            z = np.linalg.solve(A, b)
        except np.linalg.LinAlgError as exc:
            raise SolverFailure(f"Galerkin system is singular: {exc}") from exc
        r = float(np.linalg.norm(A @ z - b) / max(np.linalg.norm(b), 1e-300))
        if r > 1e-10 and np.linalg.norm(b) > 0:
            raise SolverFailure(f"Galerkin solve residual {r:.3e} exceeds 1e-10")
        return z, None, r

    def initial_state(self, geometry, u0: Callable, shell_velocity, d0) -> StepState:
        """Kinetic-energy projection of the initial data onto the coupled space."""
        asm, basis = self.model.asm, self.basis
        c = np.asarray(geometry, dtype=float)
        kin = asm.kinematics(GeometryState(c, np.zeros_like(c)), with_rate=False)
        fields = asm.dof_fields(kin)
        M = asm.mass(kin, fields)
        Mz = basis.project(M) + self.Msz
        ux = np.asarray(u0(kin["x"]), dtype=float)
        b = basis.project_vector(self.model.cfg.density * asm.load(kin, fields, ux))
        b = b + self.Ps.T @ (self.Ms @ np.asarray(shell_velocity, dtype=float))
        z, p, _ = self._solve(Mz, b) if np.any(b) else (np.zeros(basis.n), None, 0.0)
        state = StepState(0.0, z, np.asarray(d0, dtype=float).copy(), c, Mz, p)
        self.check_residuals(state)
        return state

    def check_residuals(self, state: StepState) -> tuple[float, float]:
        u = self.basis.fluid(state.z)
        div = float(np.max(np.abs(self.div @ u))) if u.size else 0.0
        g = GeometryState(state.geometry, np.zeros_like(state.geometry))
        tr = trace_residual(self.model, self.basis, g, state.z)
        if div > self.residual_tol or tr > self.residual_tol:
            raise InvariantViolation(f"after the step at t={state.t:.6g}: divergence residual {div:.3e}, "
                                     f"trace residual {tr:.3e} (limit {self.residual_tol:.1e})")
        return div, tr

    def step(self, state: StepState, geometry_next, dt: float, transport: Callable | None = None,
             force: Callable | None = None, shell_force: Callable | None = None):
        """Advance by ``dt``.  Returns the new state and a dict of step quantities."""
        model, basis, th = self.model, self.basis, self.theta
        asm = model.asm
        c0, c1 = state.geometry, np.asarray(geometry_next, dtype=float)
        rate = (c1 - c0) / dt
        g_th = GeometryState((1 - th) * c0 + th * c1, rate)
        t_th = state.t + th * dt
        if self.fluid_inert and force is None:
            L = V = self.Sz * 0.0
        else:
            vq = None
            if transport is not None:
                vq = np.asarray(transport(t_th, asm.physical_points(g_th)), dtype=float)
            ops, kin, fields = asm.assemble(g_th, vq)
            Lfull = ops.rate + 0.5 * ops.boundary + ops.visc
            if ops.conv is not None:
                Lfull = Lfull + ops.conv
            L = basis.project(Lfull)
            V = basis.project(ops.visc)
        M1 = self.fluid_mass(c1)
        Mbar = 0.5 * (state.mass + M1)
        F = np.zeros(basis.n)
        fnorm = 0.0
        if force is not None:
            fx = np.asarray(force(t_th, kin["x"]), dtype=float)
            F += basis.project_vector(asm.load(kin, fields, fx))
            fnorm = asm.l2_norm_points(kin, fx)
        gnorm = 0.0
        if shell_force is not None:
            F += self.shell_load(shell_force, t_th)
            gnorm = self.shell_force_norm(shell_force, t_th)
        K = L + (th * dt) * self.Sz
        A = Mbar / dt + th * K
        rhs = F + Mbar @ state.z / dt - (1 - th) * (K @ state.z) - self.Ps.T @ (self.S @ state.d)
        z1, p, res = self._solve(A, rhs)
        z_th = (1 - th) * state.z + th * z1
        d1 = state.d + dt * (self.Ps @ z_th)
        new = StepState(state.t + dt, z1, d1, c1, M1, p)
        div, tr = self.check_residuals(new)
        self.last_residuals = (div, tr, res)
        if fnorm and self._fscale == 0.0:
            fterm = np.inf
        else:
            fterm = fnorm * self._fscale
        info = {
            "dissipation": dt * float(z_th @ (V @ z_th)),
            "work": dt * float(F @ z_th),
            "envelope_rate": fterm + gnorm * self._gscale,
            "divergence": div, "trace": tr, "solve_residual": res,
        }
        return new, info
