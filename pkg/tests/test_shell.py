import numpy as np
import pytest
from scipy.linalg import eigh

from koiterfsi.errors import ConfigurationError, ParameterError
from koiterfsi.geometry import FunctionProfile
from koiterfsi.shell import (SHELL_KINDS, KoiterMaterial, beam_wavenumbers, build_shell_basis, coercivity_constant,
                             koiter_energy, koiter_gradient, koiter_l2_gradient)
from koiterfsi.suite import shell_checks


def sin2(L):
    a = np.pi / L
    return FunctionProfile(lambda q: np.sin(a * q) ** 2, lambda q: a * np.sin(2 * a * q),
                           lambda q: 2 * a * a * np.cos(2 * a * q))


def test_flat_energy_is_pure_bending_closed_form(channel):
    mat = KoiterMaterial(lame_lambda=2.0, lame_mu=0.5, thickness_half=0.3)
    L = channel.length
    exact = 0.5 * mat.bending_coefficient * 4 * (np.pi / L) ** 4 * L / 2
    assert koiter_energy(mat, channel, sin2(L), sin2(L)) == pytest.approx(exact, rel=1e-13)


def test_arc_energy_includes_the_membrane_term(arc):
    mat = KoiterMaterial()
    one = FunctionProfile(lambda q: np.ones_like(q), lambda q: 0 * q, lambda q: 0 * q)
    R = arc.curve.radius
    # for eta = 1 on a circle: sigma = -1/R, xi = -1/R^2 (up to orientation, both squared)
    exact = 0.5 * arc.length * (mat.membrane_coefficient / R**2 + mat.bending_coefficient / R**4)
    assert koiter_energy(mat, arc, one, one) == pytest.approx(exact, rel=1e-12)


def test_beam_wavenumbers_solve_the_clamped_frequency_equation():
    k = beam_wavenumbers(6, 2.0)
    assert np.max(np.abs(np.cos(2 * k) * np.cosh(2 * k) - 1.0) / np.cosh(2 * k)) < 1e-12
    assert np.all(np.diff(k) > 0)


@pytest.mark.parametrize("kind", SHELL_KINDS)
def test_every_kind_is_clamped_and_positive(channel, kind):
    basis = build_shell_basis(channel, 10, kind)
    assert basis.n_modes == 10
    ends = np.array([0.0, channel.length])
    assert np.max(np.abs(basis.eval(ends))) < 1e-12 and np.max(np.abs(basis.eval(ends, 1))) < 1e-12
    assert np.linalg.eigvalsh(basis.stiffness(KoiterMaterial()))[0] > 0
    assert coercivity_constant(KoiterMaterial(), basis) > 0


def test_stiffness_matrix_is_twice_the_energy(channel, rng):
    mat = KoiterMaterial()
    basis = build_shell_basis(channel, 8, "quadratic-bsplines-clamped")
    a, b = rng.normal(size=(2, 8))
    S = basis.stiffness(mat)
    assert a @ S @ b == pytest.approx(2 * koiter_energy(mat, channel, basis.function(a), basis.function(b)),
                                      rel=1e-12)
    assert np.allclose(koiter_gradient(mat, channel, basis.function(a)), S @ a, rtol=0, atol=1e-12)


def test_l2_gradient_represents_the_dual_vector(channel, rng):
    mat = KoiterMaterial()
    basis = build_shell_basis(channel, 8)
    eta = basis.function(rng.normal(size=8))
    g = koiter_l2_gradient(mat, channel, eta)
    assert np.allclose(basis.mass @ g.coeffs, koiter_gradient(mat, channel, eta))


def test_projection_reproduces_members_of_the_span(channel, rng):
    basis = build_shell_basis(channel, 9, "cubic-bsplines-clamped")
    c = rng.normal(size=9)
    assert np.max(np.abs(basis.project(basis.function(c)) - c)) < 1e-10


def test_ritz_reduction_keeps_the_lowest_eigenvalues(channel):
    mat = KoiterMaterial()
    full = build_shell_basis(channel, 12, "cubic-bsplines-clamped")
    small = build_shell_basis(channel, 12, "cubic-bsplines-clamped", material=mat, n_ritz=3)
    lam_full = eigh(full.stiffness(mat), full.mass, eigvals_only=True)
    lam_small = eigh(small.stiffness(mat), small.mass, eigvals_only=True)
    assert small.n_modes == 3
    assert np.allclose(lam_small, lam_full[:3], rtol=1e-10)


def test_bad_parameters_are_rejected(channel):
    with pytest.raises(ParameterError):
        KoiterMaterial(lame_mu=0.0)
    with pytest.raises(ParameterError):
        build_shell_basis(channel, 0)
    with pytest.raises(ConfigurationError):
        build_shell_basis(channel, 4, "hermite")


def test_shell_suite_passes():
    checks = shell_checks(np.random.default_rng(5))
    assert all(c.passed for c in checks), [c.line() for c in checks if not c.passed]
