import numpy as np
import pytest
from scipy.sparse import csr_matrix

from src.fem.assembly import assemble_mass, assemble_stiffness_grad
from src.fem.spaces import BoundaryCondition, Family, make_space
from src.linalg.eigen import (
    cfl_time_step,
    dense_generalized_eigenvalues,
    inverse_power_iteration_genevp,
    largest_eigenpair,
    power_iteration_genevp,
)
from src.utils.error_utils import InvalidArgumentError, SolverFailureError


def _pair(mesh, degree=1):
    space = make_space(mesh, Family.CG, degree, BoundaryCondition.DIRICHLET)
    return assemble_stiffness_grad(space), assemble_mass(space)


def _analytic_p1(n):
    h = 1.0 / n
    theta = np.arange(1, n) * np.pi * h
    return 6.0 / h ** 2 * (1.0 - np.cos(theta)) / (2.0 + np.cos(theta))


def test_dense_spectrum_matches_closed_form(coarse_mesh_1d):
    K, M = _pair(coarse_mesh_1d)
    dense = dense_generalized_eigenvalues(K, M)
    assert np.allclose(dense, np.sort(_analytic_p1(16)), rtol=1e-10)


@pytest.mark.parametrize("degree", [1, 2])
def test_power_iteration_matches_dense_oracle(coarse_mesh_1d, seed, degree):
    K, M = _pair(coarse_mesh_1d, degree)
    lam = power_iteration_genevp(K, M, seed=seed)
    exact = dense_generalized_eigenvalues(K, M)[-1]
    assert abs(lam - exact) / exact <= 1e-8


def test_largest_eigenpair_residual(coarse_mesh_1d):
    K, M = _pair(coarse_mesh_1d)
    pair = largest_eigenpair(K, M, tol=1e-10)
    assert pair.residual <= 1e-10
    assert pair.iterations >= 1
    assert pair.vector @ (M @ pair.vector) == pytest.approx(1.0, rel=1e-12)


def test_inverse_iteration_finds_fundamental(coarse_mesh_1d):
    K, M = _pair(coarse_mesh_1d)
    lam = inverse_power_iteration_genevp(K, M, seed=3)
    exact = dense_generalized_eigenvalues(K, M)[0]
    assert abs(lam - exact) / exact <= 1e-8
    assert lam == pytest.approx(np.pi ** 2, rel=1e-2)


def test_power_iteration_is_seeded(coarse_mesh_1d):
    K, M = _pair(coarse_mesh_1d)
    a = largest_eigenpair(K, M, seed=7)
    b = largest_eigenpair(K, M, seed=7)
    assert a.value == b.value
    assert a.iterations == b.iterations


def test_eigen_rejects_asymmetric():
    K = csr_matrix(np.array([[2.0, 1.0], [0.0, 2.0]]))
    M = csr_matrix(np.eye(2))
    with pytest.raises(InvalidArgumentError):
        power_iteration_genevp(K, M)


def test_eigen_rejects_mismatched_sizes(coarse_mesh_1d):
    K, M = _pair(coarse_mesh_1d)
    with pytest.raises(InvalidArgumentError):
        power_iteration_genevp(K, csr_matrix(np.eye(3)))


def test_power_iteration_gives_up(coarse_mesh_1d):
    K, M = _pair(coarse_mesh_1d)
    with pytest.raises(SolverFailureError):
        power_iteration_genevp(K, M, tol=1e-14, max_iter=3)


def test_cfl_time_step():
    assert cfl_time_step(4.0) == pytest.approx(1.0)
    assert cfl_time_step(1e4) == pytest.approx(0.02)
    with pytest.raises(InvalidArgumentError):
        cfl_time_step(0.0)
