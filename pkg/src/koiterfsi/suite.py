"""Invariant suites and convergence studies behind the identity-suite mode.

Each check returns a :class:`Check` holding the measured value and the limit
it is compared with, so reports and tests read the same numbers.
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from . import oracle
from .config import RunConfig, scenario_config
from .discretization import (BoundarySpec, FlatChannelAssembler, GeometryState, MixedSpace, rectangle_mesh,
                             selection_map, solve_saddle)
from .extension import (StokesLift, extend, fiber_factor, fiber_factor_constant_curvature, tube_extension)
from .geometry import (FunctionProfile, arc_geometry, boundary_metric_gamma, channel_geometry, green_pairing,
                       hanzawa, hanzawa_inverse, hanzawa_jacobian, pseudonormal_gamma)
from .shell import KoiterMaterial, build_shell_basis, koiter_energy, koiter_gradient


@dataclass
class Check:
    group: str
    name: str
    value: float
    limit: float
    passed: bool
    detail: str = ""

    def line(self) -> str:
        flag = "PASS" if self.passed else "FAIL"
        return f"[{flag}] {self.group}: {self.name} = {self.value:.3e} (limit {self.limit:.3g}){self.detail}"


def _below(group, name, value, limit, detail="") -> Check:
    value = float(value)
    return Check(group, name, value, limit, bool(np.isfinite(value) and value <= limit), detail)


def _above(group, name, value, limit, detail="") -> Check:
    value = float(value)
    return Check(group, name, value, limit, bool(np.isfinite(value) and value > limit), detail)


@dataclass
class SuiteReport:
    checks: list = field(default_factory=list)
    seconds: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def group(self, name: str) -> list:
        return [c for c in self.checks if c.group == name]

    def lines(self) -> list[str]:
        out = [c.line() for c in self.checks]
        out += [f"runtime {g}: {s:.2f} s" for g, s in self.seconds.items()]
        return out


def _smooth_profile(amp: float, length: float, k: int = 1, phase: float = 0.0) -> FunctionProfile:
    """``amp sin^2(pi q / L) cos(k pi q / L + phase)``, clamped at both ends."""
    a = np.pi / length
    c = k * a

    def f(q):
        return amp * np.sin(a * q) ** 2 * np.cos(c * q + phase)

    def df(q):
        return amp * (a * np.sin(2 * a * q) * np.cos(c * q + phase) - c * np.sin(a * q) ** 2 * np.sin(c * q + phase))

    def d2f(q):
        s2, cc, ss = np.sin(a * q) ** 2, np.cos(c * q + phase), np.sin(c * q + phase)
        return amp * (2 * a * a * np.cos(2 * a * q) * cc - 2 * a * c * np.sin(2 * a * q) * ss - c * c * s2 * cc)

    return FunctionProfile(f, df, d2f)


# --------------------------------------------------------------------------
def geometry_checks(rng: np.random.Generator, n_points: int = 10_000) -> list[Check]:
    geom = channel_geometry()
    L, H = geom.length, geom.height
    eta = _smooth_profile(0.9 * geom.alpha, L, k=1, phase=0.3)
    X = np.column_stack([rng.uniform(0, L, n_points), rng.uniform(0, H, n_points)])
    Y = hanzawa(geom, eta, X)
    back = hanzawa_inverse(geom, eta, Y)
    out = [_below("geometry", "Hanzawa round trip", np.max(np.abs(back - X)), 1e-10)]
    _, J = hanzawa_jacobian(geom, eta, X)
    out.append(_above("geometry", "min det dPsi", np.min(J), 0.0))

    small = _smooth_profile(0.05, L, k=2)
    Xt = np.column_stack([rng.uniform(0.1, L - 0.1, 20), rng.uniform(H - 0.75 * geom.kappa, H - 0.01, 20)])
    Fa, _ = hanzawa_jacobian(geom, small, Xt)
    worst = 0.0
    for x, F in zip(Xt, Fa):
        Ffd = oracle.fd_jacobian(lambda y: hanzawa(geom, small, y[None, :], check=False)[0], x, 1e-6)
        worst = max(worst, float(np.max(np.abs(Ffd - F))))
    out.append(_below("geometry", "Jacobian vs finite differences", worst, 1e-6))

    arc = arc_geometry()
    R = arc.curve.radius
    q = np.linspace(0.0, arc.length, 201)[1:-1]
    const = FunctionProfile(lambda s: np.full_like(s, 0.1 * R), lambda s: 0 * s, lambda s: 0 * s)
    g1 = pseudonormal_gamma(arc, const, q)
    g2 = boundary_metric_gamma(arc, const, q)
    out.append(_below("geometry", "gamma formula vs boundary metric (arc)", np.max(np.abs(g1 - g2)), 1e-6))

    c = rng.normal(size=8)

    def phi(y):
        x1, x2 = y[:, 0], y[:, 1]
        return np.column_stack([c[0] + c[1] * x1 * x2 + c[2] * x2**3, c[3] * x1**2 + c[4] * x1 * x2**2])

    def grad_phi(y):
        x1, x2 = y[:, 0], y[:, 1]
        g = np.zeros((y.shape[0], 2, 2))
        g[:, 0, 0], g[:, 0, 1] = c[1] * x2, c[1] * x1 + 3 * c[2] * x2**2
        g[:, 1, 0], g[:, 1, 1] = 2 * c[3] * x1 + c[4] * x2**2, 2 * c[4] * x1 * x2
        return g

    def psi(y):
        return c[5] + c[6] * y[:, 0] * y[:, 1] + c[7] * y[:, 1] ** 3

    def grad_psi(y):
        return np.column_stack([c[6] * y[:, 1], c[6] * y[:, 0] + 3 * c[7] * y[:, 1] ** 2])

    lhs, rhs = green_pairing(geom, small, phi, grad_phi, psi, grad_psi, degree=3, order=12)
    out.append(_below("geometry", "Green pairing residual (degree 3)", abs(lhs - rhs), 1e-8))
    return out


def shell_checks(rng: np.random.Generator) -> list[Check]:
    geom = channel_geometry()
    mat = KoiterMaterial()
    basis = build_shell_basis(geom, 12)
    out = []
    sym = grad2 = fd = 0.0
    S = basis.stiffness(mat)
    for _ in range(50):
        a, b = rng.normal(size=(2, basis.n_modes))
        eta, zeta = basis.function(a), basis.function(b)
        k_ab = koiter_energy(mat, geom, eta, zeta)
        scale = np.sqrt(abs(koiter_energy(mat, geom, eta, eta) * koiter_energy(mat, geom, zeta, zeta)))
        sym = max(sym, abs(k_ab - koiter_energy(mat, geom, zeta, eta)) / scale)
        grad2 = max(grad2, abs(2.0 * k_ab - koiter_gradient(mat, geom, eta) @ b) / scale)
        energy = lambda v: koiter_energy(mat, geom, basis.function(v), basis.function(v))  # noqa: E731
        fd = max(fd, abs(oracle.fd_energy_gradient(energy, a, b, 1e-5) - koiter_gradient(mat, geom, eta) @ b) / scale)
    out.append(_below("shell", "K symmetry (relative)", sym, 1e-14))
    out.append(_below("shell", "2K vs gradient pairing (relative)", grad2, 1e-12))
    out.append(_below("shell", "gradient vs finite differences (relative)", fd, 1e-6))
    out.append(_below("shell", "stiffness symmetry (relative)", np.max(np.abs(S - S.T)) / np.max(np.abs(S)), 1e-14))
    for kind in ("clamped-beam-eigenfunctions", "cubic-bsplines-clamped"):
        b32 = build_shell_basis(geom, 32, kind)
        lam = np.linalg.eigvalsh(b32.stiffness(mat))
        out.append(_above("shell", f"min stiffness eigenvalue, 32 modes ({kind})", lam[0], 0.0,
                          f", condition {lam[-1] / lam[0]:.2e}"))
        endpoints = np.array([0.0, geom.length])
        clamp = max(np.max(np.abs(b32.eval(endpoints))), np.max(np.abs(b32.eval(endpoints, 1))))
        out.append(_below("shell", f"clamped end values, 32 modes ({kind})", clamp, 1e-12))
        out.append(_above("shell", f"min mass eigenvalue, 32 modes ({kind})", np.linalg.eigvalsh(b32.mass)[0], 0.0))
    return out


def extension_checks(rng: np.random.Generator) -> list[Check]:
    geom = channel_geometry()
    L, H, a = geom.length, geom.height, geom.alpha
    lift = StokesLift(geom)
    basis = build_shell_basis(geom, 8)
    eta = _smooth_profile(0.6 * a, L, k=1, phase=0.5)
    b = basis.function(rng.normal(size=basis.n_modes))
    F = extend(geom, eta, b, lift)
    out = [_below("extension", "divergence of the extension", np.max(np.abs(lift.div_ref @ F.coeffs)), 1e-10)]
    q = basis.quad_nodes
    top = np.column_stack([q, H + eta.eval(q)])
    tr = F(top) - b.eval(q)[:, None] * geom.curve.normal(q)
    out.append(_below("extension", "trace equals b nu on the deformed shell", np.max(np.abs(tr)), 1e-10))
    s = np.linspace(-a, a, 41)
    lateral = np.concatenate([np.column_stack([np.full_like(s, x), H + s]) for x in (0.0, L)])
    out.append(_below("extension", "lateral tube trace", np.max(np.abs(F(lateral))), 1e-10))
    qq = rng.uniform(0, L, 200)
    ss = rng.uniform(-a, a, 200)
    flat = fiber_factor(geom, eta, qq, ss)
    out.append(Check("extension", "flat fiber factor equals one", float(np.max(np.abs(flat - 1.0))), 0.0,
                     bool(np.all(flat == 1.0))))
    arc = arc_geometry()
    qa = rng.uniform(0.05, arc.length - 0.05, 200)
    sa = rng.uniform(-0.9 * arc.alpha, 0.9 * arc.alpha, 200)
    ea = FunctionProfile(lambda t: 0.5 * arc.alpha * np.sin(np.pi * t / arc.length) ** 2)
    diff = fiber_factor(arc, ea, qa, sa) - fiber_factor_constant_curvature(arc, ea, qa, sa)
    out.append(_below("extension", "fiber factor vs closed form (arc)", np.max(np.abs(diff)), 1e-10))
    u = lift.tube_coefficients(b)
    flux = lift.interface_flux(u)
    out.append(_below("extension", "compensated boundary flux", abs(lift.boundary_flux(F.coeffs)), 1e-12,
                      f", crossing flux {flux:.3e}"))
    second = basis.function(rng.normal(size=basis.n_modes))
    both = basis.function(b.coeffs + 2.0 * second.coeffs)
    lin = lift.extend_coefficients(both) - F.coeffs - 2.0 * lift.extend_coefficients(second)
    out.append(_below("extension", "linearity in b", np.max(np.abs(lin)), 1e-12))
    inner = np.column_stack([rng.uniform(0.1, L - 0.1, 50), H + rng.uniform(-0.9 * a, 0.0, 50)])
    tube_vals = tube_extension(geom, eta, b, inner)
    out.append(_below("extension", "tube field constant along fibers",
                      np.max(np.abs(tube_vals[:, 1] - b.eval(inner[:, 0]))), 1e-14))
    return out


def identity_suite(seed: int = 0) -> SuiteReport:
    rng = np.random.default_rng(seed)
    rep = SuiteReport()
    for name, fn in (("geometry", geometry_checks), ("shell", shell_checks), ("extension", extension_checks)):
        t0 = time.perf_counter()
        rep.checks.extend(fn(rng))
        rep.seconds[name] = time.perf_counter() - t0
    return rep


# --------------------------------------------------------------------------
@dataclass
class ConvergenceStudy:
    parameters: list
    errors: list

    @property
    def orders(self) -> list[float]:
        e = np.asarray(self.errors)
        return list(np.log2(e[:-1] / e[1:]))


def manufactured_stokes(geom=None, sizes=(8, 16, 32, 64), viscosity: float = 1.0) -> ConvergenceStudy:
    """Velocity L2 errors of the Q2-Q1 Stokes solve for a closed-form solution.

    The velocity is the curl of ``sin^2(pi x/L) sin^2(pi y)``, so it vanishes
    on the whole boundary; the pressure is ``cos(pi x/L) cos(pi y)``.
    """
    geom = geom or channel_geometry()
    L, H = geom.length, geom.height
    a, b = np.pi / L, np.pi / H

    def parts(x):
        x1, x2 = x[..., 0], x[..., 1]
        S, S1 = np.sin(a * x1) ** 2, a * np.sin(2 * a * x1)
        S2, S3 = 2 * a * a * np.cos(2 * a * x1), -4 * a**3 * np.sin(2 * a * x1)
        T, T1 = np.sin(b * x2) ** 2, b * np.sin(2 * b * x2)
        T2, T3 = 2 * b * b * np.cos(2 * b * x2), -4 * b**3 * np.sin(2 * b * x2)
        return S, S1, S2, S3, T, T1, T2, T3

    def exact(x):
        S, S1, _, _, T, T1, _, _ = parts(x)
        return np.stack([S * T1, -S1 * T], axis=-1)

    def forcing(x):
        S, S1, S2, S3, T, T1, T2, T3 = parts(x)
        lap1 = S2 * T1 + S * T3
        lap2 = -(S3 * T + S1 * T2)
        x1, x2 = x[..., 0], x[..., 1]
        px = -a * np.sin(a * x1) * np.cos(b * x2)
        py = -b * np.cos(a * x1) * np.sin(b * x2)
        return np.stack([-viscosity * lap1 + px, -viscosity * lap2 + py], axis=-1)

    errors = []
    for n in sizes:
        mesh = rectangle_mesh(L, H, n, max(2, int(round(n * H / L))))
        space = MixedSpace(mesh)
        asm = FlatChannelAssembler(mesh, geom, space, quad_order=8, density=1.0, viscosity=viscosity)
        kin = asm.kinematics(GeometryState.zero(asm.gspace), with_rate=False)
        fields = asm.dof_fields(kin)
        A = asm.viscous(kin, fields)
        rhs = asm.load(kin, fields, forcing(kin["x"]))
        bc = BoundarySpec(inlet="no-slip", outlet="no-slip", bottom="no-slip")
        fixed = np.union1d(space.udofs("M"), space.dirichlet_dofs(bc))
        res = solve_saddle(A, asm.divergence_reference(), rhs, P=selection_map(space.n_u, fixed), pin_pressure=0)
        err = asm.velocity_at_points(res.u, fields) - exact(kin["x"])
        errors.append(asm.l2_norm_points(kin, err))
    return ConvergenceStudy(list(sizes), errors)


def oscillator_config(dt: float, T: float = 1.0, amplitude: float = 0.05) -> RunConfig:
    """Shell-only reduction: one Ritz mode and an inert fluid."""
    return scenario_config("zero", density=0.0, viscosity=0.0, n_shell_modes=1, path="modal", n_fluid_modes=0,
                           bottom="natural", eta0_amp=amplitude, dt=dt, T=T)


def oscillator_study(dts=(0.02, 0.01, 0.005, 0.0025), T: float = 1.0) -> ConvergenceStudy:
    """Max-in-time error of the one-mode shell trajectory against the closed form."""
    from .coupled import CoupledProblem, solve_decoupled

    errors = []
    for dt in dts:
        pb = CoupledProblem(oscillator_config(dt, T))
        res = solve_decoupled(pb, pb.initial_delta(), sample=False)
        m, s = pb.model.shell.mass[0, 0], pb.model.shell_stiffness[0, 0]
        y, _ = oracle.oscillator_reference(m, s, pb.data.eta0[0], pb.data.eta1[0], res.times,
                                           inertia=pb.model.material.inertia)
        errors.append(float(np.max(np.abs(res.eta.coeffs[:, 0] - y))))
    return ConvergenceStudy(list(dts), errors)
