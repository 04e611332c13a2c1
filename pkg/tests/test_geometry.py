import numpy as np
import pytest

from koiterfsi import oracle
from koiterfsi.errors import AdmissibilityError, ConfigurationError, OutOfTubeError, ParameterError
from koiterfsi.geometry import (ConstantProfile, FunctionProfile, boundary_metric_gamma, check_admissible,
                                green_pairing, hanzawa, hanzawa_inverse, hanzawa_jacobian, korn_ratio, piola_push,
                                pseudonormal_gamma, tube_coords, tube_point)
from koiterfsi.suite import _smooth_profile, geometry_checks


def bump(geom, amp, k=1):
    return _smooth_profile(amp, geom.length, k=k, phase=0.3)


def test_tube_coords_on_the_flat_edge(channel):
    q, s = tube_coords(channel, np.array([[0.5, 1.2], [1.7, 0.4]]))
    assert np.allclose(q, [0.5, 1.7]) and np.allclose(s, [0.2, -0.6])


def test_tube_coords_on_the_arc_match_polar_form(arc):
    q = np.array([0.1, 0.7, 1.3])
    s = np.array([-0.3, 0.0, 0.25])
    qq, ss = tube_coords(arc, tube_point(arc, q, s))
    assert np.max(np.abs(qq - q)) < 1e-12 and np.max(np.abs(ss - s)) < 1e-12
    qe, se = arc.curve.tube_coords_exact(tube_point(arc, q, s))
    assert np.allclose(qe, q, atol=1e-12) and np.allclose(se, s, atol=1e-12)


def test_tube_coords_rejects_points_outside(channel):
    with pytest.raises(OutOfTubeError):
        tube_coords(channel, np.array([[1.0, 0.1]]))


def test_zero_displacement_is_the_identity(channel, rng):
    X = rng.uniform([0, 0], [2, 1], size=(500, 2))
    assert np.array_equal(hanzawa(channel, ConstantProfile(0.0), X), X)


def test_constant_displacement_moves_the_top_rigidly(channel):
    X = np.array([[0.3, 1.0], [1.1, 1.0], [0.7, 0.1]])
    Y = hanzawa(channel, ConstantProfile(0.2), X)
    assert np.allclose(Y[:2, 1], 1.2) and np.allclose(Y[2], X[2])


def test_inverse_round_trip_and_positive_determinant(channel, rng):
    eta = bump(channel, 0.27)
    X = rng.uniform([0, 0], [2, 1], size=(2000, 2))
    assert np.max(np.abs(hanzawa_inverse(channel, eta, hanzawa(channel, eta, X)) - X)) < 1e-10
    assert np.min(hanzawa_jacobian(channel, eta, X)[1]) > 0.0


def test_jacobian_matches_finite_differences_on_the_arc(arc, rng):
    eta = FunctionProfile(lambda q: 0.1 * np.sin(np.pi * q / arc.length) ** 2,
                          lambda q: 0.1 * np.pi / arc.length * np.sin(2 * np.pi * q / arc.length))
    q = rng.uniform(0.1, arc.length - 0.1, 10)
    s = rng.uniform(-0.7, -0.05, 10)
    X = tube_point(arc, q, s)
    F, _ = hanzawa_jacobian(arc, eta, X)
    for x, Fx in zip(X, F):
        Ffd = oracle.fd_jacobian(lambda y: hanzawa(arc, eta, y[None], check=False)[0], x, 1e-6)
        assert np.max(np.abs(Ffd - Fx)) < 1e-6


def test_determinant_on_the_boundary_is_one_plus_eta_times_cutoff_slope(channel):
    eta = bump(channel, 0.2)
    q = np.linspace(0.05, 1.95, 9)
    _, J = hanzawa_jacobian(channel, eta, np.column_stack([q, np.ones_like(q)]))
    expected = 1.0 + eta.eval(q) * channel.beta_hat(np.zeros_like(q), 1)
    assert np.max(np.abs(J - expected)) < 1e-14


def test_piola_transport_scales_divergence_by_the_determinant(channel):
    eta = bump(channel, 0.15, k=2)
    phi = lambda x: np.column_stack([np.sin(x[:, 0]) * x[:, 1], x[:, 0] * x[:, 1] ** 2])  # noqa: E731
    div_ref = lambda x: np.cos(x[0]) * x[1] + 2 * x[0] * x[1]  # noqa: E731
    pushed = piola_push(channel, eta, phi)
    for x in np.array([[0.4, 0.6], [1.1, 0.9], [1.6, 0.35]]):
        y = hanzawa(channel, eta, x[None])[0]
        G = oracle.fd_jacobian(lambda p: pushed(p[None])[0], y, 1e-6)
        J = hanzawa_jacobian(channel, eta, x[None])[1][0]
        assert np.trace(G) == pytest.approx(div_ref(x) / J, abs=1e-7)


def test_gamma_formula_equals_the_boundary_metric(arc, channel):
    q = np.linspace(0.0, arc.length, 51)[1:-1]
    eta = ConstantProfile(0.1)
    assert np.max(np.abs(pseudonormal_gamma(arc, eta, q) - boundary_metric_gamma(arc, eta, q))) < 1e-12
    flat = bump(channel, 0.2)
    qf = np.linspace(0.1, 1.9, 20)
    assert np.allclose(pseudonormal_gamma(channel, flat, qf), 1.0)


def test_admissibility_guard(channel):
    check_admissible(channel, ConstantProfile(0.25))
    with pytest.raises(AdmissibilityError):
        hanzawa(channel, ConstantProfile(0.9), np.array([[1.0, 0.5]]))


@pytest.mark.parametrize("amp,k", [(0.0, 1), (0.05, 2), (0.2, 1)])
def test_green_pairing_balances_for_polynomials(channel, amp, k):
    eta = bump(channel, amp, k)
    phi = lambda y: np.column_stack([y[:, 0] * y[:, 1] ** 2, y[:, 0] ** 3 - y[:, 1]])  # noqa: E731

    def grad_phi(y):
        g = np.zeros((len(y), 2, 2))
        g[:, 0, 0], g[:, 0, 1] = y[:, 1] ** 2, 2 * y[:, 0] * y[:, 1]
        g[:, 1, 0], g[:, 1, 1] = 3 * y[:, 0] ** 2, -1.0
        return g

    psi = lambda y: 1.0 + y[:, 0] * y[:, 1]  # noqa: E731
    grad_psi = lambda y: np.column_stack([y[:, 1], y[:, 0]])  # noqa: E731
    lhs, rhs = green_pairing(channel, eta, phi, grad_phi, psi, grad_psi, degree=3, order=12)
    assert abs(lhs - rhs) < 1e-8


def test_green_pairing_refuses_an_underintegrating_rule(channel):
    z = lambda y: np.zeros((len(y), 2))  # noqa: E731
    with pytest.raises(ConfigurationError):
        green_pairing(channel, ConstantProfile(0.0), z, z, z, z, degree=3, order=4)


def test_green_pairing_requires_the_flat_channel(arc):
    z = lambda y: np.zeros((len(y), 2))  # noqa: E731
    with pytest.raises(ConfigurationError):
        green_pairing(arc, ConstantProfile(0.0), z, z, z, z)


def test_korn_ratio_positive_and_parameter_guard(channel):
    phi = lambda y: np.column_stack([np.sin(y[:, 1]), y[:, 0] * y[:, 1]])  # noqa: E731

    def grad_phi(y):
        g = np.zeros((len(y), 2, 2))
        g[:, 0, 1] = np.cos(y[:, 1])
        g[:, 1, 0], g[:, 1, 1] = y[:, 1], y[:, 0]
        return g

    ratio = korn_ratio(channel, bump(channel, 0.1), phi, grad_phi)
    assert 0.0 < ratio < 10.0
    with pytest.raises(ParameterError):
        korn_ratio(channel, bump(channel, 0.1), phi, grad_phi, r=2.0, p=2.0)


def test_geometry_suite_passes():
    checks = geometry_checks(np.random.default_rng(3))
    assert all(c.passed for c in checks), [c.line() for c in checks if not c.passed]
