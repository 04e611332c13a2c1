import numpy as np
import pytest

from koiterfsi.coupled import (ShellTrajectory, VelocityHistory, epsilon_one, epsilon_zero, mollify_displacement,
                               mollify_velocity)
from koiterfsi.coupled.mollify import kernel_rule, reflect
from koiterfsi.errors import ParameterError
from koiterfsi.shell import build_shell_basis


@pytest.fixture(scope="module")
def basis(channel):
    return build_shell_basis(channel, 8)


def moving(basis, T=1.0, n=41):
    times = np.linspace(0.0, T, n)
    c = np.outer(np.sin(2 * times), np.linspace(0.05, -0.03, basis.n_modes))
    return ShellTrajectory(times, c, basis)


@pytest.mark.parametrize("one_sided", [False, True])
def test_kernel_weights_are_normalized(one_sided):
    z, w = kernel_rule(8, one_sided)
    assert w.sum() == pytest.approx(1.0, abs=1e-15) and np.all(w > 0)
    lo = 0.0 if one_sided else -1.0
    assert np.all((z > lo) & (z < 1.0))


def test_reflection_is_even_about_both_ends():
    assert np.allclose(reflect(np.array([-0.2, 0.5, 2.3]), 2.0), [0.2, 0.5, 1.7])


def test_zero_displacement_becomes_the_lift(channel, basis):
    zero = ShellTrajectory.constant(basis, np.zeros(8), [0.0, 1.0])
    R = mollify_displacement(zero, 0.04, channel)
    assert np.allclose(R.eval(0.3, np.linspace(0, 2, 11)), 0.2, atol=1e-15)


def test_regularization_parameter_bounds(channel, basis):
    traj = moving(basis)
    with pytest.raises(ParameterError):
        mollify_displacement(traj, 0.0, channel)
    with pytest.raises(ParameterError):
        mollify_displacement(traj, 0.05, channel, eps0=0.04)
    mollify_displacement(traj, 0.04, channel, eps0=0.04)


def test_smoothing_converges_as_eps_shrinks(channel, basis):
    traj = moving(basis)
    q = np.linspace(0.05, 1.95, 57)
    exact = basis.eval(q) @ traj.at(0.6)[0]
    errs = [np.max(np.abs(mollify_displacement(traj, e, channel).eval(0.6, q) - exact))
            for e in (0.04, 0.01, 0.0025)]
    assert errs[0] > errs[1] > errs[2]


def test_displacement_smoothing_only_looks_back_in_time(channel, basis):
    a = moving(basis)
    b = ShellTrajectory(a.times, a.coeffs.copy(), basis)
    b.coeffs[a.times > 0.5] += 0.02
    q = np.linspace(0, 2, 9)
    ra, rb = mollify_displacement(a, 0.03, channel), mollify_displacement(b, 0.03, channel)
    assert np.array_equal(ra.eval(0.5, q), rb.eval(0.5, q))
    assert not np.allclose(ra.eval(0.55, q), rb.eval(0.55, q))


def test_regularized_initial_domain_lies_above_the_initial_one(channel, basis):
    eta0 = 0.02 * np.linspace(1.0, -1.0, basis.n_modes)
    e1 = epsilon_one(channel, basis, eta0)
    e0 = epsilon_zero(channel, basis, eta0)
    assert 0 < e0 <= e1
    q = np.linspace(0.0, 2.0, 201)
    R = mollify_displacement(ShellTrajectory.constant(basis, eta0, [0.0, 1.0]), e0, channel)
    assert np.min(R.eval(0.0, q) - basis.eval(q) @ eta0) > 0.0


def test_velocity_smoothing_preserves_affine_fields():
    A, c = np.array([[0.3, -1.0], [2.0, 0.5]]), np.array([0.1, -0.2])
    v = lambda t, x: x @ A.T + t * c  # noqa: E731
    x = np.array([[0.4, 0.2], [1.5, 0.9]])
    assert np.allclose(mollify_velocity(v, 0.05, 0.7, x), v(0.7, x), atol=1e-14)
    with pytest.raises(ParameterError):
        mollify_velocity(v, 0.0, 0.7, x)


def test_velocity_history_interpolates_bilinearly(channel):
    times = np.array([0.0, 0.5, 1.0])
    h = VelocityHistory.zeros(channel, 0.1, times)
    P = h.points
    frame = np.stack([P[..., 0] + 2 * P[..., 1], 1.0 - P[..., 0]], axis=-1)
    h = h.like(np.stack([frame * (1 + t) for t in times]))
    x = np.array([[0.33, 0.41], [1.72, 0.08]])
    expected = np.column_stack([x[:, 0] + 2 * x[:, 1], 1.0 - x[:, 0]]) * 1.25
    assert np.allclose(h(0.25, x), expected, atol=1e-13)
    assert not np.any(h(1.5, x))
    assert h.l2_distance(h) == 0.0
