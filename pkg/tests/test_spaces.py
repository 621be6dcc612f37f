import numpy as np
import pytest

from src.fem.spaces import (
    BoundaryCondition,
    Compatibility,
    Family,
    check_compatible,
    derivative_space,
    make_space,
)
from src.utils.error_utils import CompatibilityViolationError, UnsupportedSpaceError


@pytest.mark.parametrize("degree", [1, 2, 3, 4])
def test_cg_dof_counts_1d(mesh_1d, degree):
    n = mesh_1d.n_cells
    free = make_space(mesh_1d, Family.CG, degree)
    clamped = make_space(mesh_1d, Family.CG, degree, BoundaryCondition.DIRICHLET)
    assert free.dof_count == n * degree + 1
    assert clamped.dof_count == n * degree - 1
    assert (clamped.cell_dofs == -1).sum() == 2


@pytest.mark.parametrize("degree", [0, 1, 3])
def test_dg_dof_counts_1d(mesh_1d, degree):
    space = make_space(mesh_1d, Family.DG, degree)
    assert space.dof_count == mesh_1d.n_cells * (degree + 1)
    assert space.block_diagonal


def test_2d_dof_counts(mesh_2d):
    assert make_space(mesh_2d, Family.CG, 1).dof_count == mesh_2d.n_vertices
    assert make_space(mesh_2d, Family.CG, 1, BoundaryCondition.DIRICHLET).dof_count == 9
    assert make_space(mesh_2d, Family.DG, 0).dof_count == mesh_2d.n_cells
    assert make_space(mesh_2d, Family.DG, 0, value_shape="vector").dof_count == 2 * mesh_2d.n_cells
    rt = make_space(mesh_2d, "raviart-thomas-0", 0, value_shape="vector")
    assert rt.dof_count == mesh_2d.n_edges
    assert rt.has_divergence


def test_cg_nodes_sorted_along_interval(mesh_1d):
    space = make_space(mesh_1d, Family.CG, 3)
    x = space.node_coordinates[:, 0]
    assert np.all(np.diff(x) > 0.0)
    assert x[0] == pytest.approx(0.0)
    assert x[-1] == pytest.approx(1.0)


@pytest.mark.parametrize("family, degree, bc, shape", [
    (Family.RT, 0, BoundaryCondition.NONE, "vector"),
    (Family.CG, 5, BoundaryCondition.NONE, "scalar"),
    (Family.DG, 1, BoundaryCondition.DIRICHLET, "scalar"),
    (Family.CG, 1, BoundaryCondition.NONE, "tensor"),
])
def test_unsupported_1d_spaces(mesh_1d, family, degree, bc, shape):
    with pytest.raises(UnsupportedSpaceError):
        make_space(mesh_1d, family, degree, bc, shape)


@pytest.mark.parametrize("family, degree, shape", [
    (Family.CG, 2, "scalar"),
    (Family.DG, 1, "scalar"),
    (Family.RT, 0, "scalar"),
    (Family.CG, 1, "vector"),
])
def test_unsupported_2d_spaces(mesh_2d, family, degree, shape):
    with pytest.raises(UnsupportedSpaceError):
        make_space(mesh_2d, family, degree, value_shape=shape)


def test_unknown_family_is_unsupported(mesh_1d):
    with pytest.raises(UnsupportedSpaceError):
        make_space(mesh_1d, "nedelec", 1)


@pytest.mark.parametrize("degree", [1, 2, 4])
def test_derivative_space_of_cg(mesh_1d, degree):
    image = derivative_space(make_space(mesh_1d, Family.CG, degree, BoundaryCondition.DIRICHLET))
    assert image.family == Family.DG
    assert image.degree == degree - 1


def test_derivative_space_of_rt(mesh_2d):
    image = derivative_space(make_space(mesh_2d, Family.RT, 0, value_shape="vector"))
    assert image.family == Family.DG
    assert image.degree == 0
    assert image.value_shape == "scalar"


def test_exact_compatibility_accepts_the_image(mesh_1d):
    trial = make_space(mesh_1d, Family.CG, 2, BoundaryCondition.DIRICHLET)
    check_compatible(make_space(mesh_1d, Family.DG, 1), trial, "grad")


def test_exact_compatibility_rejects_a_mismatched_degree(mesh_1d):
    trial = make_space(mesh_1d, Family.CG, 2, BoundaryCondition.DIRICHLET)
    with pytest.raises(CompatibilityViolationError):
        check_compatible(make_space(mesh_1d, Family.DG, 0), trial, "grad")


def test_exact_compatibility_impossible_in_2d(mesh_2d):
    trial = make_space(mesh_2d, Family.CG, 1, BoundaryCondition.DIRICHLET)
    test = make_space(mesh_2d, Family.DG, 0, value_shape="vector")
    with pytest.raises(CompatibilityViolationError):
        check_compatible(test, trial, "grad")
    check_compatible(test, trial, "grad", Compatibility.INCLUSION)


def test_compatibility_rejects_different_meshes(mesh_1d, coarse_mesh_1d):
    with pytest.raises(CompatibilityViolationError):
        check_compatible(make_space(coarse_mesh_1d, Family.DG, 0), make_space(mesh_1d, Family.CG, 1), "grad")


def test_gradient_of_dg_is_undefined(mesh_1d):
    with pytest.raises(UnsupportedSpaceError):
        check_compatible(make_space(mesh_1d, Family.DG, 0), make_space(mesh_1d, Family.DG, 1), "grad")
