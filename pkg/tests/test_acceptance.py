"""Acceptance criteria 1-10, one summary line each (see the terminal summary).

Tolerances and runtime budgets are pinned as module constants.
"""
import time

import numpy as np
import pytest
from conftest import record_criterion

from koiterfsi.config import scenario_config
from koiterfsi.coupled import (CoupledProblem, adapt_initial_data, epsilon_continuation, epsilon_zero,
                               picard_couple, solve_decoupled)
from koiterfsi.coupled.mollify import MollifiedDisplacement, ShellTrajectory
from koiterfsi.extension import fiber_factor
from koiterfsi.geometry import arc_geometry
from koiterfsi.shell import build_shell_basis
from koiterfsi.suite import extension_checks, geometry_checks, manufactured_stokes, oscillator_study, shell_checks

SUITE_BUDGET = {1: 10.0, 2: 10.0, 3: 30.0}
STOKES_ORDER, STOKES_ORDER_TOL, STOKES_BUDGET = 2.0, 0.2, 120.0
OSCILLATOR_ORDER, OSCILLATOR_BUDGET = 1.9, 10.0
DRIFT_LIMIT, GROENWALL_SLACK, ENERGY_BUDGET = 0.01, 0.02, 300.0
RESIDUAL_LIMIT = 1e-9
PICARD_MIN_ITER, SELF_CONSISTENCY_TOL, PICARD_BUDGET = 4, 1e-6, 600.0
CONTINUATION_LEVELS, CONTINUATION_BUDGET = 4, 1800.0
ADAPTATION_FACTOR, ADAPTATION_HALVINGS = 2.0, 4


def timed(fn, *args, **kwargs):
    t0 = time.perf_counter()
    out = fn(*args, **kwargs)
    return out, time.perf_counter() - t0


@pytest.mark.parametrize("number,suite", [(1, geometry_checks), (2, shell_checks), (3, extension_checks)])
def test_identity_suites(number, suite):
    checks, sec = timed(suite, np.random.default_rng(number))
    failed = [c.name for c in checks if not c.passed]
    ok = not failed and sec <= SUITE_BUDGET[number]
    worst = "; ".join(f"{c.name} {c.value:.2e}" for c in checks if c.limit > 0)
    record_criterion(number, ok, f"{suite.__name__}: {len(checks)} checks, {len(failed)} failed, "
                                 f"{sec:.2f} s (budget {SUITE_BUDGET[number]:.0f} s) [{worst}]")
    assert not failed, failed
    assert sec <= SUITE_BUDGET[number]


def test_manufactured_stokes_convergence():
    study, sec = timed(manufactured_stokes)
    orders = study.orders
    ok = len(orders) >= 3 and min(orders) >= STOKES_ORDER - STOKES_ORDER_TOL and sec <= STOKES_BUDGET
    record_criterion(4, ok, f"velocity L2 orders {', '.join(f'{o:.3f}' for o in orders)} "
                            f"(need >= {STOKES_ORDER - STOKES_ORDER_TOL:.1f}), {sec:.1f} s")
    assert len(orders) >= 3
    assert min(orders) >= STOKES_ORDER - STOKES_ORDER_TOL
    assert sec <= STOKES_BUDGET


def test_shell_oscillator_order():
    study, sec = timed(oscillator_study)
    orders = study.orders
    ok = len(orders) >= 3 and min(orders) >= OSCILLATOR_ORDER and sec <= OSCILLATOR_BUDGET
    record_criterion(5, ok, f"time orders {', '.join(f'{o:.3f}' for o in orders)} "
                            f"(need >= {OSCILLATOR_ORDER}), {sec:.2f} s")
    assert len(orders) >= 3 and min(orders) >= OSCILLATOR_ORDER
    assert sec <= OSCILLATOR_BUDGET


@pytest.fixture(scope="module")
def energy_runs():
    t0 = time.perf_counter()
    free = CoupledProblem(scenario_config("free"))
    res_free = solve_decoupled(free, free.prescribed_delta(), sample=False)
    forced = CoupledProblem(scenario_config("forced"))
    res_forced = solve_decoupled(forced, forced.initial_delta(), sample=False)
    return res_free, res_forced, time.perf_counter() - t0


def test_decoupled_energy_law(energy_runs):
    free, forced, sec = energy_runs
    drift = free.ledger.drift_rate()
    ratio = forced.ledger.groenwall_ratio()
    bound = forced.ledger.groenwall_ok(GROENWALL_SLACK)
    ok = drift <= DRIFT_LIMIT and bound and sec <= ENERGY_BUDGET
    record_criterion(6, ok, f"free drift {drift:.2e}/E0 per unit time (limit {DRIFT_LIMIT}); forced "
                            f"sqrt(E)/envelope max {ratio:.4f} (limit {1 + GROENWALL_SLACK}); {sec:.1f} s")
    assert drift <= DRIFT_LIMIT
    assert bound
    assert sec <= ENERGY_BUDGET


def test_step_residuals(energy_runs):
    free, forced, _ = energy_runs
    div = max(free.residuals["divergence"], forced.residuals["divergence"])
    tr = max(free.residuals["trace"], forced.residuals["trace"])
    ok = div <= RESIDUAL_LIMIT and tr <= RESIDUAL_LIMIT
    record_criterion(7, ok, f"max divergence residual {div:.2e}, max trace residual {tr:.2e} "
                            f"(limit {RESIDUAL_LIMIT:.0e})")
    assert div <= RESIDUAL_LIMIT and tr <= RESIDUAL_LIMIT


def test_picard_coupling():
    pb = CoupledProblem(scenario_config("forced"))
    res, sec = timed(picard_couple, pb)
    h = np.asarray(res.history)
    monotone = len(h) >= PICARD_MIN_ITER and bool(np.all(np.diff(h) < 0))
    sc = res.self_consistency if res.self_consistency is not None else np.inf
    ok = res.converged and monotone and sc <= SELF_CONSISTENCY_TOL and sec <= PICARD_BUDGET
    rates = res.rates
    record_criterion(8, ok, f"{res.iterations} iterations, monotone={monotone}, mean rate "
                            f"{np.mean(rates) if rates else np.nan:.3f}, self-consistency {sc:.2e} "
                            f"(tol {SELF_CONSISTENCY_TOL:.0e}), {sec:.1f} s")
    assert res.converged and monotone
    assert sc <= SELF_CONSISTENCY_TOL
    assert sec <= PICARD_BUDGET


@pytest.mark.slow
def test_epsilon_continuation():
    pb = CoupledProblem(scenario_config("forced"))
    cont, sec = timed(epsilon_continuation, pb, CONTINUATION_LEVELS)
    de, du = (np.asarray(v) for v in cont.differences())
    decreasing = bool(len(de) == CONTINUATION_LEVELS - 1 and np.all(np.diff(de) < 0) and np.all(np.diff(du) < 0))
    bounds = all(lv.groenwall_ok for lv in cont.levels)
    gaps = all(lv.min_gap > 0 for lv in cont.levels)
    ok = cont.complete and decreasing and bounds and gaps and sec <= CONTINUATION_BUDGET
    record_criterion(9, ok, f"diff_eta {', '.join(f'{v:.3e}' for v in de)}; diff_u "
                            f"{', '.join(f'{v:.3e}' for v in du)}; envelope ok={bounds}; "
                            f"min gap {min(lv.min_gap for lv in cont.levels):.3e}; {sec / 60:.1f} min")
    assert cont.complete
    assert decreasing
    assert bounds and gaps
    assert sec <= CONTINUATION_BUDGET


def test_initial_data_adaptation():
    pb = CoupledProblem(scenario_config("free"))
    schedule = [pb.eps0 / 2**n for n in range(ADAPTATION_HALVINGS + 1)]
    norms = []
    for eps in schedule:
        R = MollifiedDisplacement(pb.initial_delta(), eps, pb.model.geom, pb.cfg.kernel_points, eps0=pb.eps0)
        norms.append(adapt_initial_data(pb.model, pb.data, R).norms)
    bounded = all(n["u0_eps"] <= ADAPTATION_FACTOR * n["u0"] and n["eta1_eps"] <= ADAPTATION_FACTOR * n["eta1"]
                  for n in norms)
    du = np.array([n["u0_diff"] for n in norms])
    de = np.array([n["eta1_diff"] for n in norms])
    flat_ok = bool(np.all(np.diff(du) < 0) and np.all(np.diff(de) <= 0))

    # the shell-velocity rescaling is the identity on the flat channel; exercise it on the arc
    arc = arc_geometry()
    basis = build_shell_basis(arc, 8)
    eta0 = 0.03 * np.linspace(1.0, -0.5, basis.n_modes)
    eta1 = 0.1 * np.ones(basis.n_modes)
    q, w = basis.quad_nodes, basis.quad_weights
    e1 = basis.eval(q) @ eta1
    eps0 = epsilon_zero(arc, basis, eta0)
    traj = ShellTrajectory.constant(basis, eta0, [0.0, 1.0])
    eta0_fn = basis.function(eta0)
    arc_diff, arc_ratio = [], []
    for n in range(ADAPTATION_HALVINGS + 1):
        R = MollifiedDisplacement(traj, eps0 / 2**n, arc, eps0=eps0)
        adapted = fiber_factor(arc, eta0_fn, q, R.eval(0.0, q)) * e1
        arc_diff.append(np.sqrt(np.sum((adapted - e1) ** 2 * w)))
        arc_ratio.append(np.sqrt(np.sum(adapted**2 * w) / np.sum(e1**2 * w)))
    arc_ok = bool(np.all(np.diff(arc_diff) < 0) and max(arc_ratio) <= ADAPTATION_FACTOR)
    ok = bounded and flat_ok and arc_ok
    record_criterion(10, ok, f"max |u0^eps|/|u0| {max(n['u0_eps'] / n['u0'] for n in norms):.4f}, "
                             f"|u0^eps - u0| {du[0]:.3e} -> {du[-1]:.3e}, |eta1^eps - eta1| {de.max():.1e} (flat); "
                             f"arc {arc_diff[0]:.3e} -> {arc_diff[-1]:.3e}, max ratio {max(arc_ratio):.4f}")
    assert bounded
    assert flat_ok
    assert arc_ok
