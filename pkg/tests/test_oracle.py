"""The verifiers are checked against closed forms before anything relies on them."""
import numpy as np
import pytest

from koiterfsi import oracle


def test_fd_jacobian_of_identity():
    J = oracle.fd_jacobian(lambda x: x, np.array([0.3, -1.2]), 1e-4)
    assert np.allclose(J, np.eye(2), atol=1e-12)


def test_fd_jacobian_of_linear_map_is_exact():
    A = np.array([[1.5, -2.0], [0.25, 3.0], [4.0, 0.5]])
    J = oracle.fd_jacobian(lambda x: A @ x, np.array([0.7, 0.1]), 1e-3)
    assert np.max(np.abs(J - A)) < 1e-12


def test_fd_jacobian_error_is_second_order():
    f = lambda x: np.array([np.sin(x[0]) * x[1], np.exp(x[1])])  # noqa: E731
    x = np.array([0.4, 0.3])
    exact = np.array([[np.cos(0.4) * 0.3, np.sin(0.4)], [0.0, np.exp(0.3)]])
    e1 = np.max(np.abs(oracle.fd_jacobian(f, x, 1e-2) - exact))
    e2 = np.max(np.abs(oracle.fd_jacobian(f, x, 5e-3) - exact))
    assert 3.5 < e1 / e2 < 4.5


def test_quad_integral_constant_on_unit_square():
    assert abs(oracle.quad_integral(lambda p: np.ones(len(p)), (0, 1, 0, 1), 2) - 1.0) < 1e-15


def test_quad_integral_polynomial_exactness():
    val = oracle.quad_integral(lambda p: p[:, 0] ** 2 * p[:, 1] ** 2, (0, 1, 0, 1), 4)
    assert abs(val - 1.0 / 9.0) < 1e-15


def test_quad_integral_curved_region_area():
    top = lambda x: 1.0 + 0.1 * np.sin(np.pi * x / 2.0) ** 2  # noqa: E731
    val = oracle.quad_integral(lambda p: np.ones(len(p)), (0.0, 2.0, 0.0, top), 12, n_sub=16)
    assert abs(val - 2.1) < 1e-12


def test_quad_integral_interval():
    assert abs(oracle.quad_integral(lambda x: x**5, (0.0, 2.0), 5) - 64.0 / 6.0) < 1e-13


def test_fd_energy_gradient_of_quadratic_at_zero():
    A = np.array([[2.0, 0.5], [0.5, 1.0]])
    energy = lambda v: 0.5 * v @ A @ v  # noqa: E731
    assert abs(oracle.fd_energy_gradient(energy, np.zeros(2), np.array([1.0, -2.0]))) < 1e-15


def test_fd_energy_gradient_halving_is_second_order():
    energy = lambda v: np.sum(np.cos(v)) + v[0] ** 4  # noqa: E731
    eta, zeta = np.array([0.3, -0.8]), np.array([1.0, 0.5])
    exact = -np.sin(eta) @ zeta + 4 * eta[0] ** 3 * zeta[0]
    e1 = abs(oracle.fd_energy_gradient(energy, eta, zeta, 1e-2) - exact)
    e2 = abs(oracle.fd_energy_gradient(energy, eta, zeta, 5e-3) - exact)
    assert 3.5 < e1 / e2 < 4.5


def test_oscillator_reference_cosine_solution():
    t = np.linspace(0.0, 3.0, 31)
    y, v = oracle.oscillator_reference(1.5, 12.0, 0.2, 0.0, t, inertia=2.0)
    omega = np.sqrt(12.0 / 3.0)
    assert np.allclose(y, 0.2 * np.cos(omega * t), atol=1e-15)
    assert np.allclose(v, -0.2 * omega * np.sin(omega * t), atol=1e-15)


def test_oscillator_reference_energy_is_constant():
    t = np.linspace(0.0, 10.0, 1001)
    m, s, inertia = 0.7, 5.0, 2.0
    y, v = oracle.oscillator_reference(m, s, 0.1, -0.3, t, inertia=inertia)
    e = 0.5 * inertia * m * v**2 + 0.5 * s * y**2
    assert np.max(np.abs(e - e[0])) < 1e-15 * 10


def test_oscillator_quarter_period_zero_crossing():
    m, s = 1.0, 9.0
    omega = np.sqrt(s / (2.0 * m))
    root = oracle.first_zero_crossing(lambda t: oracle.oscillator_reference(m, s, 1.0, 0.0, t)[0], 2.0)
    assert root == pytest.approx(np.pi / (2 * omega), abs=1e-12)
