import numpy as np
import pytest
import scipy.sparse as sp

from koiterfsi import oracle
from koiterfsi.discretization import (BoundarySpec, FlatChannelAssembler, GeometryState, MixedSpace,
                                      ReferenceMesh, channel_mesh, divfree_nullspace, inf_sup_constant,
                                      rectangle_mesh, selection_map, solve_saddle)
from koiterfsi.errors import ConfigurationError, SizeError
from koiterfsi.suite import _smooth_profile


@pytest.fixture(scope="module")
def setup(channel):
    mesh = channel_mesh(channel)
    space = MixedSpace(mesh)
    asm = FlatChannelAssembler(mesh, channel, space, quad_order=8)
    g = GeometryState(asm.gspace.fit(_smooth_profile(0.2, channel.length, k=1, phase=0.4)),
                      asm.gspace.fit(_smooth_profile(0.5, channel.length, k=2)))
    return mesh, space, asm, g


def test_mesh_has_lines_on_the_tube_and_cutoff_kinks(channel):
    mesh = channel_mesh(channel)
    H, k = channel.height, channel.kappa
    for y in (H - channel.alpha, H + k * channel.cutoff.lower, H + k * channel.cutoff.upper):
        assert np.min(np.abs(mesh.ynodes - y)) < 1e-13


def test_mesh_rejects_unsorted_breakpoints():
    with pytest.raises(ConfigurationError):
        ReferenceMesh(np.array([0.0, 0.5, 0.4]), np.array([0.0, 1.0]))


def test_geometry_splines_reproduce_cubics(setup):
    _, _, asm, _ = setup
    cubic = lambda x: 0.1 * x**3 - 0.3 * x + 0.05  # noqa: E731
    prof = asm.gspace.profile(asm.gspace.fit(cubic(asm.gspace.fit_points)))
    x = np.linspace(0, 2, 41)
    assert np.max(np.abs(prof.eval(x) - cubic(x))) < 1e-12


def test_reference_mass_against_the_oracle(setup, channel):
    mesh, space, asm, _ = setup
    field = lambda p: np.column_stack([p[:, 0] ** 2 * p[:, 1], 1.0 - p[:, 1] ** 2 + p[:, 0]])  # noqa: E731
    u = space.interpolate(field)
    kin = asm.kinematics(GeometryState.zero(asm.gspace), with_rate=False)
    M = asm.mass(kin, asm.dof_fields(kin))
    exact = oracle.quad_integral(lambda p: (field(p) ** 2).sum(axis=1), (0.0, 2.0, 0.0, 1.0), 8)
    assert u @ M @ u == pytest.approx(exact, rel=1e-13)


def test_integrals_over_the_deformed_domain_against_the_oracle(setup):
    _, _, asm, g = setup
    kin = asm.kinematics(g, with_rate=False)
    prof = asm.gspace.profile(g.coeffs)
    top = lambda x: 1.0 + prof.eval(x)  # noqa: E731
    f = lambda p: p[..., 0] ** 2 * p[..., 1] + 1.0  # noqa: E731
    lhs = asm.integrate(kin, f(kin["x"]))
    rhs = oracle.quad_integral(lambda p: f(p), (0.0, 2.0, 0.0, top), 10, n_sub=16)
    assert abs(lhs - rhs) < 1e-8


def test_piola_divergence_does_not_see_the_geometry(setup):
    _, _, asm, g = setup
    kin = asm.kinematics(g, with_rate=False)
    diff = asm.divergence_moving(kin) - asm.divergence_reference()
    assert abs(diff).max() < 1e-12


def test_convection_is_antisymmetric(setup, rng):
    _, _, asm, g = setup
    kin = asm.kinematics(g, with_rate=False)
    fields = asm.dof_fields(kin)
    C = asm.convection(kin, fields, rng.normal(size=kin["x"].shape))
    assert abs(C + C.T).max() < 1e-13


def test_viscous_form_vanishes_on_rigid_rotation(setup):
    _, space, asm, _ = setup
    u = space.interpolate(lambda p: np.column_stack([-p[:, 1], p[:, 0]]) + 0.3)
    kin = asm.kinematics(GeometryState.zero(asm.gspace), with_rate=False)
    A = asm.viscous(kin, asm.dof_fields(kin))
    assert np.max(np.abs(A @ u)) < 1e-12


def test_zero_data_gives_zero_saddle_solution(setup):
    _, space, asm, _ = setup
    kin = asm.kinematics(GeometryState.zero(asm.gspace), with_rate=False)
    A = asm.viscous(kin, asm.dof_fields(kin))
    res = solve_saddle(A, asm.divergence_reference(), np.zeros(space.n_u), pin_pressure=0)
    assert not np.any(res.u) and not np.any(res.p) and res.residual == 0.0


def test_saddle_solve_enforces_the_constraint(setup, rng):
    _, space, asm, _ = setup
    kin = asm.kinematics(GeometryState.zero(asm.gspace), with_rate=False)
    A = asm.viscous(kin, asm.dof_fields(kin)) + asm.mass(kin, asm.dof_fields(kin))
    D = asm.divergence_reference()
    fixed = space.dirichlet_dofs(BoundarySpec(bottom="no-slip"))
    res = solve_saddle(A, D, rng.normal(size=space.n_u), P=selection_map(space.n_u, fixed))
    assert np.max(np.abs(D @ res.u)) < 1e-10 and np.max(np.abs(res.u[fixed])) == 0.0


def test_null_space_dimension_matches_the_rank():
    from koiterfsi.geometry import channel_geometry
    geom = channel_geometry()
    mesh = rectangle_mesh(2.0, 1.0, 4, 2)
    space = MixedSpace(mesh)
    D = FlatChannelAssembler(mesh, geom, space).divergence_reference()
    bc = BoundarySpec(bottom="no-slip")
    Z = divfree_nullspace(space, D, bc)
    free = np.setdiff1d(np.arange(space.n_u), np.union1d(space.udofs("M"), space.dirichlet_dofs(bc)))
    assert Z.shape[1] == free.size - np.linalg.matrix_rank(D.toarray()[:, free])
    assert np.allclose(Z.T @ Z, np.eye(Z.shape[1]), atol=1e-12)


def test_null_space_refuses_large_systems(setup):
    _, space, asm, _ = setup
    with pytest.raises(SizeError):
        divfree_nullspace(space, asm.divergence_reference(), max_dofs=100)


def test_inf_sup_constant_is_bounded_away_from_zero(channel):
    mesh = rectangle_mesh(2.0, 1.0, 8, 4)
    space = MixedSpace(mesh)
    asm = FlatChannelAssembler(mesh, channel, space)
    kin = asm.kinematics(GeometryState.zero(asm.gspace), with_rate=False)
    fields = asm.dof_fields(kin)
    H1 = asm.viscous(kin, fields) + asm.mass(kin, fields)
    fixed = np.union1d(space.udofs("M"), space.dirichlet_dofs(BoundarySpec("no-slip", "no-slip", "no-slip")))
    assert inf_sup_constant(space, sp.csr_matrix(H1), asm.divergence_reference(), fixed, skip=1) > 1e-3


def test_selection_map_picks_the_free_entries():
    P = selection_map(5, np.array([1, 3]))
    assert np.array_equal(P @ np.array([1.0, 2.0, 3.0]), [1.0, 0.0, 2.0, 0.0, 3.0])
