import numpy as np
import pytest

from src.fem.assembly import (
    MaterialParams,
    assemble_coupling_div,
    assemble_coupling_grad,
    assemble_load,
    assemble_mass,
    assemble_stiffness_div,
    assemble_stiffness_grad,
    derivative_image,
    export_rows,
    image_operator,
    interpolate,
    invert_block_diagonal,
    l2_error,
    rotate_vector_rows,
    rt_normal_traces,
)
from src.fem.spaces import BoundaryCondition, Compatibility, Family, make_space
from src.utils.error_utils import (
    CompatibilityViolationError,
    InvalidArgumentError,
    UnsupportedSpaceError,
)


def _ones(space):
    return np.ones(space.dof_count)


@pytest.mark.parametrize("degree", [1, 2, 3, 4])
def test_mass_total_is_domain_measure_1d(mesh_1d, degree):
    space = make_space(mesh_1d, Family.CG, degree)
    M = assemble_mass(space, 2.5)
    assert _ones(space) @ M @ _ones(space) == pytest.approx(2.5, rel=1e-13)
    assert abs(M - M.T).max() < 1e-15


@pytest.mark.parametrize("family, degree, shape", [(Family.CG, 1, "scalar"), (Family.DG, 0, "scalar")])
def test_mass_total_is_domain_measure_2d(mesh_2d, family, degree, shape):
    space = make_space(mesh_2d, family, degree, value_shape=shape)
    M = assemble_mass(space)
    assert _ones(space) @ M @ _ones(space) == pytest.approx(1.0, rel=1e-13)


def test_mass_positive_definite(coarse_mesh_1d):
    M = assemble_mass(make_space(coarse_mesh_1d, Family.CG, 2, BoundaryCondition.DIRICHLET)).toarray()
    assert np.linalg.eigvalsh(M).min() > 0.0


@pytest.mark.parametrize("degree", [1, 2, 3])
def test_stiffness_kills_constants(mesh_1d, degree):
    space = make_space(mesh_1d, Family.CG, degree)
    K = assemble_stiffness_grad(space)
    assert np.max(np.abs(K @ _ones(space))) < 1e-11


def test_stiffness_energy_of_linear_function(mesh_1d):
    space = make_space(mesh_1d, Family.CG, 1)
    x = interpolate(space, lambda p: 3.0 * p[:, 0])
    assert x @ assemble_stiffness_grad(space, 2.0) @ x == pytest.approx(18.0, rel=1e-12)


def test_stiffness_2d_energy_of_linear_function(mesh_2d):
    space = make_space(mesh_2d, Family.CG, 1)
    u = interpolate(space, lambda p: p[:, 0] + 2.0 * p[:, 1])
    assert u @ assemble_stiffness_grad(space) @ u == pytest.approx(5.0, rel=1e-12)


def test_grad_coupling_of_linear_function(mesh_1d):
    trial = make_space(mesh_1d, Family.CG, 1)
    test = make_space(mesh_1d, Family.DG, 0)
    G = assemble_coupling_grad(test, trial)
    x = interpolate(trial, lambda p: p[:, 0])
    assert np.allclose(G @ x, mesh_1d.measures, rtol=1e-12)


def test_grad_coupling_needs_exact_image(mesh_1d):
    trial = make_space(mesh_1d, Family.CG, 2)
    with pytest.raises(CompatibilityViolationError):
        assemble_coupling_grad(make_space(mesh_1d, Family.DG, 0), trial)
    G = assemble_coupling_grad(make_space(mesh_1d, Family.DG, 2), trial, Compatibility.INCLUSION)
    assert G.shape == (mesh_1d.n_cells * 3, trial.dof_count)


@pytest.mark.parametrize("degree", [1, 2, 3])
def test_image_operator_differentiates_exactly(mesh_1d, degree):
    trial = make_space(mesh_1d, Family.CG, degree)
    u = interpolate(trial, lambda p: p[:, 0] ** degree)
    image, du = derivative_image(trial, u)
    assert l2_error(image, du, lambda p: degree * p[:, 0] ** (degree - 1)) < 1e-11


def test_div_coupling_of_rt_fields(mesh_2d):
    rt = make_space(mesh_2d, Family.RT, 0, value_shape="vector")
    dg = make_space(mesh_2d, Family.DG, 0)
    D = assemble_coupling_div(dg, rt)
    constant = interpolate(rt, lambda p: np.column_stack([np.ones(len(p)), -0.5 * np.ones(len(p))]))
    radial = interpolate(rt, lambda p: p)
    assert np.max(np.abs(D @ constant)) < 1e-13
    assert np.allclose(D @ radial, 2.0 * mesh_2d.measures, rtol=1e-12)


def test_rt_interpolant_reproduces_linear_fields(mesh_2d):
    rt = make_space(mesh_2d, Family.RT, 0, value_shape="vector")
    field = lambda p: np.column_stack([1.0 + p[:, 0], 2.0 + p[:, 1]])  # noqa: E731
    assert l2_error(rt, interpolate(rt, field), field) < 1e-13


def test_rt_normal_traces_are_continuous(mesh_2d):
    rt = make_space(mesh_2d, Family.RT, 0, value_shape="vector")
    traces = rt_normal_traces(rt)
    edges = mesh_2d.cell_edges
    for e in np.flatnonzero(~mesh_2d.boundary_edges):
        (c0, i0), (c1, i1) = np.argwhere(edges == e)
        assert np.allclose(traces[c0, i0], traces[c1, i1], atol=1e-13)


def test_div_stiffness_matches_coupling(mesh_2d):
    rt = make_space(mesh_2d, Family.RT, 0, value_shape="vector")
    dg = make_space(mesh_2d, Family.DG, 0)
    D = assemble_coupling_div(dg, rt).toarray()
    M = assemble_mass(dg).toarray()
    K = assemble_stiffness_div(rt).toarray()
    assert np.allclose(D.T @ np.linalg.inv(M) @ D, K, atol=1e-10)


def test_load_vector_integrates(mesh_1d):
    space = make_space(mesh_1d, Family.CG, 2)
    b = assemble_load(space, lambda p: 3.0 * p[:, 0] ** 2)
    assert b.sum() == pytest.approx(1.0, rel=1e-13)


def test_l2_error_of_exact_interpolant(mesh_1d):
    space = make_space(mesh_1d, Family.CG, 2)
    u = interpolate(space, lambda p: p[:, 0] ** 2 - p[:, 0])
    assert l2_error(space, u, lambda p: p[:, 0] ** 2 - p[:, 0]) < 1e-14


def test_l2_error_rejects_wrong_length(mesh_1d):
    space = make_space(mesh_1d, Family.CG, 1)
    with pytest.raises(InvalidArgumentError):
        l2_error(space, np.zeros(3), lambda p: p[:, 0])


def test_block_diagonal_inverse(mesh_1d):
    space = make_space(mesh_1d, Family.DG, 2)
    M = assemble_mass(space)
    product = (invert_block_diagonal(M, space) @ M).toarray()
    assert np.allclose(product, np.eye(space.dof_count), atol=1e-10)


def test_block_diagonal_inverse_needs_dg(mesh_1d):
    space = make_space(mesh_1d, Family.CG, 1)
    with pytest.raises(UnsupportedSpaceError):
        invert_block_diagonal(assemble_mass(space), space)


def test_image_operator_of_rt_is_divergence(mesh_2d):
    rt = make_space(mesh_2d, Family.RT, 0, value_shape="vector")
    dg = make_space(mesh_2d, Family.DG, 0)
    R = image_operator(dg, rt, "div")
    div = R @ interpolate(rt, lambda p: np.column_stack([3.0 * p[:, 0], -p[:, 1]]))
    assert np.allclose(div, 2.0, rtol=1e-12)


def test_rotated_gradient_is_curl(mesh_2d):
    e_space = make_space(mesh_2d, Family.CG, 1)
    h_space = make_space(mesh_2d, Family.DG, 0, value_shape="vector")
    C = rotate_vector_rows(assemble_coupling_grad(h_space, e_space, Compatibility.INCLUSION), h_space)
    u = interpolate(e_space, lambda p: 2.0 * p[:, 0] - p[:, 1])
    R = invert_block_diagonal(assemble_mass(h_space), h_space)
    curl = (R @ C) @ u
    comp = h_space.dof_components
    assert np.allclose(curl[comp == 0], -1.0, rtol=1e-12)
    assert np.allclose(curl[comp == 1], -2.0, rtol=1e-12)


def test_export_rows_row_major(mesh_1d):
    M = assemble_mass(make_space(mesh_1d, Family.CG, 1, BoundaryCondition.DIRICHLET))
    rows = list(export_rows(M))
    assert len(rows) == M.nnz
    assert rows == sorted(rows, key=lambda r: (r[0], r[1]))
    assert all(isinstance(i, int) and isinstance(j, int) for i, j, _ in rows)


@pytest.mark.parametrize("field", ["rho", "k_stiff", "epsilon", "mu"])
@pytest.mark.parametrize("value", [0.0, -1.0, float("nan"), True])
def test_material_rejects_non_positive(field, value):
    with pytest.raises(InvalidArgumentError):
        MaterialParams(**{field: value})


def test_material_derived_constants():
    mat = MaterialParams(rho=4.0, k_stiff=9.0, epsilon=0.25, mu=4.0)
    assert mat.wave_speed == pytest.approx(1.5)
    assert mat.compliance == pytest.approx(1.0 / 9.0)
    assert mat.specific_volume == pytest.approx(0.25)
    assert mat.light_speed == pytest.approx(1.0)


def test_mass_rejects_non_scalar_coefficient(mesh_1d):
    with pytest.raises(InvalidArgumentError):
        assemble_mass(make_space(mesh_1d, Family.CG, 1), np.ones(3))
