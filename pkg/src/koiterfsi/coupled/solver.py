"""Time marching, fixed-point coupling and the limit in the regularization parameter."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import trapezoid

from ..config import RunConfig
from ..discretization import GeometryState
from ..errors import HorizonExceeded, KoiterFSIError
from ..geometry import flat_kinematics, hanzawa_inverse
from .basis import CoupledBasis, build_coupled_basis
from .initial import AdaptedData, adapt_initial_data
from .model import FlowModel
from .mollify import (MollifiedDisplacement, ShellTrajectory, VelocityHistory, epsilon_zero,
                      mollify_velocity)
from .problem import ProblemData
from .stepper import EnergyLedger, LinearizedStepper, StepState

log = logging.getLogger(__name__)


class CoupledProblem:
    """Model, coupled basis, data and time grid for one configuration."""

    def __init__(self, cfg: RunConfig, model: FlowModel | None = None, basis: CoupledBasis | None = None):
        self.cfg = cfg
        self.model = model or FlowModel(cfg)
        self.basis = basis or build_coupled_basis(self.model)
        self.data = ProblemData(self.model, cfg)
        self.stepper = LinearizedStepper(self.model, self.basis, cfg.theta)
        self.n_steps = cfg.n_steps
        self.dt = cfg.dt
        self.times = self.dt * np.arange(self.n_steps + 1)
        self.eps0 = epsilon_zero(self.model.geom, self.model.shell, self.data.eta0, cfg.kernel_points)
        self.grid_spacing = cfg.velocity_grid_factor * float(np.min(self.model.mesh.hx))

    def with_steps(self, n_steps: int) -> "CoupledProblem":
        """Same model and data on a shorter horizon."""
        other = object.__new__(CoupledProblem)
        other.__dict__.update(self.__dict__)
        other.n_steps = n_steps
        other.times = self.dt * np.arange(n_steps + 1)
        return other

    @property
    def T(self) -> float:
        return float(self.times[-1])

    def epsilon(self) -> float:
        return self.cfg.epsilon or self.eps0

    def initial_delta(self) -> ShellTrajectory:
        return ShellTrajectory.constant(self.model.shell, self.data.eta0, self.times)

    def prescribed_delta(self) -> ShellTrajectory:
        return ShellTrajectory(self.times, self.data.prescribed_delta(self.times), self.model.shell)

    def zero_velocity(self) -> VelocityHistory:
        return VelocityHistory.zeros(self.model.geom, self.grid_spacing, self.times)


@dataclass
class DecoupledResult:
    times: np.ndarray
    eta: ShellTrajectory
    shell_velocity: np.ndarray       # (nodes, shell modes)
    z: np.ndarray                    # (nodes, unknowns)
    geometry: np.ndarray             # (nodes, geometry coefficients) of R_eps delta
    ledger: EnergyLedger
    adapted: AdaptedData
    eps: float
    residuals: dict
    pressure: list = field(default_factory=list)
    velocity: VelocityHistory | None = None

    def final_state(self) -> StepState:
        return StepState(float(self.times[-1]), self.z[-1], self.eta.coeffs[-1], self.geometry[-1])


def physical_velocity(problem: CoupledProblem, geometry_coeffs: np.ndarray, z: np.ndarray,
                      pts: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Velocity at physical points (zero above the moving boundary) and the inside mask."""
    model, geom = problem.model, problem.model.geom
    prof = model.gspace.profile(geometry_coeffs)
    inside = pts[:, 1] <= geom.height + prof.eval(pts[:, 0])
    X = hanzawa_inverse(geom, prof, pts[inside], check=False)
    d = tuple(prof.eval(X[:, 0], j) for j in range(3))
    kin = flat_kinematics(geom, X[:, 1], d)
    U = model.space.evaluate(problem.basis.fluid(z), X)
    out = np.zeros((pts.shape[0], 2))
    out[inside] = np.einsum("nij,nj->ni", kin["F"], U) / kin["J"][:, None]
    return out, inside


def sample_velocity(problem: CoupledProblem, geometry: np.ndarray, z: np.ndarray,
                    template: VelocityHistory) -> VelocityHistory:
    """Physical velocity of the coefficient history on the background grid."""
    pts = template.points.reshape(-1, 2)
    n = min(len(template.times), geometry.shape[0])
    vals = np.zeros((n,) + template.values.shape[1:])
    for k in range(n):
        vals[k] = physical_velocity(problem, geometry[k], z[k], pts)[0].reshape(template.values.shape[1:])
    return VelocityHistory(template.xs, template.ys, template.times[:n], vals)


def _quadrature_velocity(problem: CoupledProblem, geometry_coeffs, z):
    asm = problem.model.asm
    c = np.asarray(geometry_coeffs, dtype=float)
    kin = asm.kinematics(GeometryState(c, np.zeros_like(c)), with_rate=False)
    fields = asm.dof_fields(kin)
    u = asm.velocity_at_points(problem.basis.fluid(z), fields)
    return kin["x"].reshape(-1, 2), (asm.W * kin["J"]).ravel(), u.reshape(-1, 2)


def velocity_difference(problem: CoupledProblem, a: DecoupledResult, b: DecoupledResult) -> float:
    """Space-time L2 distance of two velocity histories, each extended by zero off its own domain.

    At every time node the integral over the union of the two domains is split
    into the domain of ``a`` and the part of the domain of ``b`` outside it,
    both integrated with the finite element rule of the respective domain.
    """
    n = min(len(a.times), len(b.times))
    dens = np.zeros(n)
    for k in range(n):
        xa, wa, ua = _quadrature_velocity(problem, a.geometry[k], a.z[k])
        ub_at_a, _ = physical_velocity(problem, b.geometry[k], b.z[k], xa)
        xb, wb, ub = _quadrature_velocity(problem, b.geometry[k], b.z[k])
        _, in_a = physical_velocity(problem, a.geometry[k], a.z[k], xb)
        dens[k] = np.sum(((ua - ub_at_a) ** 2).sum(axis=1) * wa) + np.sum((ub[~in_a] ** 2).sum(axis=1) * wb[~in_a])
    val = trapezoid(dens, a.times[:n]) if n > 1 else dens[0]
    return float(np.sqrt(max(val, 0.0)))


def regularized_geometry(problem: CoupledProblem, R: MollifiedDisplacement) -> np.ndarray:
    gs = problem.model.gspace
    vals = R.on_nodes(problem.times, gs.fit_points)
    R.check(vals)
    return np.stack([gs.fit(v) for v in vals])


@dataclass
class ResumePoint:
    """Where an interrupted march continues: step index, state and the ledger so far."""

    index: int
    state: StepState
    ledger: EnergyLedger


def solve_decoupled(problem: CoupledProblem, delta: ShellTrajectory, v: VelocityHistory | None = None,
                    eps: float | None = None, sample: bool = True, start: ResumePoint | None = None
                    ) -> DecoupledResult:
    """March the linear system on the domain of ``R_eps delta`` with transport ``R_eps v``.

    Failures during the march carry the last accepted state in the attribute
    ``partial`` of the raised exception.
    """
    cfg, model, stepper = problem.cfg, problem.model, problem.stepper
    eps = problem.epsilon() if eps is None else eps
    geom = model.geom
    R = MollifiedDisplacement(delta, eps, geom, cfg.kernel_points, eps0=problem.eps0)
    G = regularized_geometry(problem, R)
    adapted = adapt_initial_data(model, problem.data, R)
    data = problem.data
    transport = None
    if v is not None and np.any(v.values):
        nk = cfg.velocity_kernel_points
        transport = lambda t, x: mollify_velocity(v, eps, t, x, nk)  # noqa: E731
    force = data.f if cfg.f_amp else None
    shell_force = data.g if cfg.g_amp else None
    if start is None:
        state = stepper.initial_state(G[0], adapted.u0_eps, adapted.eta1_eps, data.eta0)
        ledger = EnergyLedger()
        ekf, eks, ekoi = stepper.energies(state)
        ledger.append(0.0, ekf, 0.0, eks, ekoi, np.sqrt(max(ekf + eks + ekoi, 0.0)), 0.0)
        first = 0
    else:
        first = start.index
        ledger = EnergyLedger(list(start.ledger.rows[:first + 1]), list(start.ledger.work[:first + 1]))
        state = start.state
        state.mass = stepper.fluid_mass(state.geometry)
    diss = ledger.rows[-1][2]
    work = ledger.work[-1]
    envelope = np.sqrt(ledger.rows[-1][6])
    # trajectories before a resume point are not stored; repeat the resumed state there
    zs, ds, ps = [state.z] * (first + 1), [state.d] * (first + 1), [state.pressure] * (first + 1)
    worst = {"divergence": 0.0, "trace": 0.0, "solve_residual": 0.0}
    try:
        for k in range(first, problem.n_steps):
            state, info = stepper.step(state, G[k + 1], problem.dt, transport, force, shell_force)
            diss += info["dissipation"]
            work += info["work"]
            envelope += problem.dt * info["envelope_rate"]
            ekf, eks, ekoi = stepper.energies(state)
            ledger.append(state.t, ekf, diss, eks, ekoi, envelope, work)
            for key in worst:
                worst[key] = max(worst[key], info[key])
            zs.append(state.z)
            ds.append(state.d)
            ps.append(state.pressure)
            sup = model.shell_sup(state.d)
            if sup > geom.alpha:
                raise HorizonExceeded(f"|eta| = {sup:.4g} exceeds alpha = {geom.alpha} at t = {state.t:.4g}",
                                      time=state.t)
    except KoiterFSIError as exc:
        exc.partial = ResumePoint(len(zs) - 1, StepState(float(problem.times[len(zs) - 1]), zs[-1], ds[-1],
                                                         G[len(zs) - 1]), ledger)
        raise
    Z = np.stack(zs)
    result = DecoupledResult(
        times=problem.times.copy(), eta=ShellTrajectory(problem.times.copy(), np.stack(ds), model.shell),
        shell_velocity=np.stack([problem.basis.shell(z) for z in zs]), z=Z, geometry=G, ledger=ledger,
        adapted=adapted, eps=eps, residuals=worst, pressure=ps)
    if sample:
        result.velocity = sample_velocity(problem, G, Z, problem.zero_velocity())
    return result


@dataclass
class PicardResult:
    converged: bool
    iterations: int
    history: list
    delta: ShellTrajectory
    velocity: VelocityHistory
    solution: DecoupledResult
    horizon: float
    bisections: int
    self_consistency: float | None = None
    message: str = ""

    @property
    def rates(self) -> list[float]:
        h = self.history
        return [h[i + 1] / h[i] for i in range(len(h) - 1) if h[i] > 0]


@dataclass
class PicardIterate:
    """Relaxed displacement and transport velocity after ``iteration`` sweeps."""

    iteration: int
    delta: ShellTrajectory
    velocity: VelocityHistory
    history: list = field(default_factory=list)


def _picard_loop(problem: CoupledProblem, eps: float, initial: PicardIterate | None = None) -> PicardResult:
    cfg, model = problem.cfg, problem.model
    values = model.sample_values
    if initial is None:
        delta, v, done, history = problem.initial_delta(), problem.zero_velocity(), 0, []
    else:
        n = problem.n_steps + 1
        delta = initial.delta.truncated(n)
        v = initial.velocity.like(initial.velocity.values[:n])
        done, history = initial.iteration, list(initial.history)
    omega = cfg.relaxation
    sol = None
    for it in range(done + 1, cfg.picard_max_iter + 1):
        try:
            sol = solve_decoupled(problem, delta, v, eps)
        except KoiterFSIError as exc:
            exc.iterate = PicardIterate(it - 1, delta, v, list(history))
            raise
        new_delta = delta.relaxed(sol.eta, omega)
        new_v = v.relaxed(sol.velocity, omega)
        diff = new_delta.sup_distance(delta, values) + new_v.l2_distance(v)
        history.append(diff)
        log.info("picard iteration %d: difference %.3e", it, diff)
        delta, v = new_delta, new_v
        if diff <= cfg.picard_tol:
            return PicardResult(True, it, history, delta, v, sol, problem.T, 0)
    if sol is None:
        sol = solve_decoupled(problem, delta, v, eps)
    return PicardResult(False, cfg.picard_max_iter, history, delta, v, sol, problem.T, 0,
                        message="maximum number of fixed-point iterations reached without meeting the tolerance")


def picard_couple(problem: CoupledProblem, eps: float | None = None, self_check: bool = True,
                  initial: PicardIterate | None = None) -> PicardResult:
    """Relaxed fixed-point iteration on (displacement, transport velocity).

    When the displacement leaves the admissible range the horizon is halved
    and the iteration restarts, at most ``max_bisections`` times.  ``initial``
    resumes from a stored iterate.
    """
    eps = problem.epsilon() if eps is None else eps
    current = problem
    if initial is not None and len(initial.delta.times) < len(problem.times):
        current = problem.with_steps(len(initial.delta.times) - 1)
    for bis in range(problem.cfg.max_bisections + 1):
        try:
            res = _picard_loop(current, eps, initial)
        except HorizonExceeded as exc:
            if bis == problem.cfg.max_bisections or current.n_steps < 2:
                raise
            log.warning("%s; halving the horizon", exc)
            current = current.with_steps(current.n_steps // 2)
            initial = None
            continue
        res.bisections = bis
        if self_check and res.converged:
            check = solve_decoupled(current, res.delta, res.velocity, eps)
            res.self_consistency = (check.eta.sup_distance(res.delta, current.model.sample_values)
                                    + check.velocity.l2_distance(res.velocity))
            res.solution = check
        return res
    raise AssertionError("unreachable")


@dataclass
class ContinuationLevel:
    eps: float
    picard: PicardResult | None
    diff_eta: float = np.nan
    diff_u: float = np.nan
    groenwall_ok: bool = False
    groenwall_ratio: float = np.nan
    min_gap: float = np.nan
    failure: str = ""


@dataclass
class ContinuationResult:
    levels: list
    complete: bool

    @property
    def final(self) -> PicardResult | None:
        done = [lv.picard for lv in self.levels if lv.picard is not None]
        return done[-1] if done else None

    def differences(self) -> tuple[list[float], list[float]]:
        lv = self.levels[1:]
        return [x.diff_eta for x in lv], [x.diff_u for x in lv]

    def table(self) -> list[dict]:
        return [{"level": i, "eps": lv.eps, "iterations": lv.picard.iterations if lv.picard else 0,
                 "converged": bool(lv.picard and lv.picard.converged), "diff_eta": lv.diff_eta,
                 "diff_u": lv.diff_u, "groenwall_ratio": lv.groenwall_ratio, "groenwall_ok": lv.groenwall_ok,
                 "min_gap": lv.min_gap, "failure": lv.failure} for i, lv in enumerate(self.levels)]


def epsilon_continuation(problem: CoupledProblem, levels: int | None = None, eps0: float | None = None,
                         slack: float = 0.02) -> ContinuationResult:
    """Run the coupled problem for ``eps0 / 2^n`` and tabulate the differences between levels."""
    levels = problem.cfg.eps_levels if levels is None else levels
    eps0 = problem.eps0 if eps0 is None else eps0
    out, prev = [], None
    for n in range(levels):
        eps = eps0 / 2 ** n
        try:
            res = picard_couple(problem, eps, self_check=False)
        except KoiterFSIError as exc:
            out.append(ContinuationLevel(eps, None, failure=f"{type(exc).__name__}: {exc}"))
            return ContinuationResult(out, False)
        sol = res.solution
        lv = ContinuationLevel(eps, res, groenwall_ok=sol.ledger.groenwall_ok(slack),
                               groenwall_ratio=sol.ledger.groenwall_ratio(), min_gap=sol.adapted.min_gap)
        if not res.converged:
            lv.failure = res.message
        if prev is not None:
            lv.diff_eta = sol.eta.sup_distance(prev.solution.eta, problem.model.sample_values)
            lv.diff_u = velocity_difference(problem, sol, prev.solution)
        out.append(lv)
        prev = res
        if not res.converged:
            return ContinuationResult(out, False)
    return ContinuationResult(out, True)
