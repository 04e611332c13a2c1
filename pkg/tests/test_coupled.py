import numpy as np
import pytest

from koiterfsi.config import scenario_config
from koiterfsi.coupled import (CoupledProblem, ResumePoint, StepState, compatibility_residual, divergence_residual,
                               picard_couple, solve_decoupled, trace_residual)
from koiterfsi.discretization import GeometryState
from koiterfsi.errors import HorizonExceeded, InvariantViolation, ParameterError

COARSE = dict(nx=8, ny_lower=4, ny_upper=2)


@pytest.fixture(scope="module")
def free_run(free_problem):
    return solve_decoupled(free_problem, free_problem.prescribed_delta())


def test_every_coupled_pair_is_solenoidal_and_trace_matched(free_problem):
    model, basis = free_problem.model, free_problem.basis
    coeffs = model.geometry_fit(model.shell.function(0.1 * np.ones(model.shell.n_modes)))
    g = GeometryState(coeffs, np.zeros_like(coeffs))
    # saddle pairs are solenoidal only after the solve; the trace holds for every column
    assert trace_residual(model, basis, g) < 1e-12


def test_modal_columns_are_solenoidal():
    pb = CoupledProblem(scenario_config("free", T=0.02, path="modal", n_fluid_modes=20, **COARSE))
    assert divergence_residual(pb.model, pb.basis) < 1e-10
    assert pb.basis.n == pb.model.shell.n_modes + 20


def test_saddle_and_modal_paths_agree():
    a = CoupledProblem(scenario_config("free", T=0.03))
    b = CoupledProblem(scenario_config("free", T=0.03, path="modal", n_fluid_modes=-1))
    ra = solve_decoupled(a, a.prescribed_delta(), sample=False)
    rb = solve_decoupled(b, b.prescribed_delta(), sample=False)
    assert np.max(np.abs(ra.eta.coeffs - rb.eta.coeffs)) < 1e-12
    assert np.max(np.abs(ra.ledger.column("E_total") - rb.ledger.column("E_total"))) < 1e-12


def test_energy_balance_on_a_short_free_run(free_run):
    led = free_run.ledger
    assert led.finite() and led.dissipation_monotone()
    defect = led.column("defect")
    # the prescribed domain motion is not the shell motion, so energy may leak but never appear
    assert np.max(defect) <= 1e-12 * led.E0
    assert np.max(np.abs(defect)) < 1e-4 * led.E0
    assert led.drift_rate() <= 0.01
    assert led.groenwall_ok(0.02)


def test_step_invariants_hold_along_the_run(free_run):
    assert free_run.residuals["divergence"] < 1e-9
    assert free_run.residuals["trace"] < 1e-9
    assert free_run.adapted.min_gap > 0


def test_zero_data_stays_at_rest():
    pb = CoupledProblem(scenario_config("zero", T=0.05))
    res = solve_decoupled(pb, pb.initial_delta(), sample=False)
    rows = np.array(res.ledger.rows)
    assert np.max(np.abs(rows[:, 1:])) == 0.0
    assert not np.any(res.z)


@pytest.mark.parametrize("scenario", ["free", "forced"])
def test_initial_data_is_compatible(scenario):
    pb = CoupledProblem(scenario_config(scenario, T=0.02, **COARSE))
    assert compatibility_residual(pb.model, pb.data) < 1e-10


def test_resume_point_reproduces_the_ledger(free_problem, free_run):
    k = 4
    state = StepState(float(free_run.times[k]), free_run.z[k], free_run.eta.coeffs[k], free_run.geometry[k])
    again = solve_decoupled(free_problem, free_problem.prescribed_delta(), sample=False,
                            start=ResumePoint(k, state, free_run.ledger))
    assert np.allclose(np.array(again.ledger.rows), np.array(free_run.ledger.rows), rtol=1e-12, atol=1e-15)


def test_regularization_above_eps0_is_rejected(free_problem):
    with pytest.raises(ParameterError):
        solve_decoupled(free_problem, free_problem.prescribed_delta(), eps=2 * free_problem.eps0, sample=False)


def test_residual_check_catches_a_broken_state(free_problem, rng):
    st = free_problem.stepper
    z = rng.normal(size=free_problem.basis.n)
    g = free_problem.model.geometry_fit(free_problem.model.shell.function(np.zeros(free_problem.model.shell.n_modes)))
    with pytest.raises(InvariantViolation):
        st.check_residuals(StepState(0.0, z, np.zeros(free_problem.model.shell.n_modes), g))


@pytest.fixture(scope="module")
def violent():
    return CoupledProblem(scenario_config("forced", T=0.2, g_amp=400.0, f_amp=0.0, picard_max_iter=2, **COARSE))


def test_large_shell_load_leaves_the_admissible_range(violent):
    with pytest.raises(HorizonExceeded) as info:
        solve_decoupled(violent, violent.initial_delta(), sample=False)
    partial = info.value.partial
    assert 0 < partial.index < violent.n_steps
    assert len(partial.ledger.rows) == partial.index + 1


def test_picard_halves_the_horizon_when_the_range_is_left(violent):
    res = picard_couple(violent, self_check=False)
    assert res.bisections == 1 and res.horizon == pytest.approx(0.1)
    assert max(violent.model.shell_sup(d) for d in res.solution.eta.coeffs) <= violent.model.geom.alpha
