import numpy as np
import pytest
from scipy.sparse import csr_matrix, diags

from src.fem.assembly import assemble_load, assemble_mass, assemble_stiffness_grad, interpolate
from src.fem.mesh import build_interval_mesh
from src.fem.spaces import BoundaryCondition, Family, make_space
from src.linalg.solvers import (
    LinearSolver,
    SolverConfig,
    SolverMethod,
    SolverStats,
    check_symmetric,
    solve_general,
    solve_spd,
)
from src.utils.error_utils import InvalidArgumentError, SolverFailureError


@pytest.fixture
def spd_matrix(mesh_1d):
    space = make_space(mesh_1d, Family.CG, 2, BoundaryCondition.DIRICHLET)
    return (assemble_mass(space) + 0.01 * assemble_stiffness_grad(space)).tocsr()


def _residual(A, x, b):
    return np.linalg.norm(b - A @ x) / np.linalg.norm(b)


@pytest.mark.parametrize("method", [SolverMethod.DIRECT, SolverMethod.CG, SolverMethod.GMRES])
def test_spd_solve_meets_tolerance(spd_matrix, rng, method):
    b = rng.standard_normal(spd_matrix.shape[0])
    stats = SolverStats()
    x = solve_spd(spd_matrix, b, SolverConfig(tol=1e-10, method=method), stats)
    assert _residual(spd_matrix, x, b) <= 1e-10 + 1e-12
    assert stats.solves == 1
    assert stats.iterations >= 1


def test_direct_and_cg_agree(spd_matrix, rng):
    b = rng.standard_normal(spd_matrix.shape[0])
    x_direct = solve_spd(spd_matrix, b, SolverConfig(method="direct"))
    x_cg = solve_spd(spd_matrix, b, SolverConfig(tol=1e-12, method="cg"))
    assert np.allclose(x_direct, x_cg, rtol=1e-8, atol=1e-10)


def test_direct_solve_counts_one_iteration(spd_matrix, rng):
    stats = SolverStats()
    LinearSolver(spd_matrix, SolverConfig(), stats=stats)(rng.standard_normal(spd_matrix.shape[0]))
    assert stats.iterations == 1
    assert stats.max_residual <= 1e-12


def test_general_solve(spd_matrix, rng):
    n = spd_matrix.shape[0]
    skew = diags([np.ones(n - 1), -np.ones(n - 1)], [1, -1]) * 0.001
    A = (spd_matrix + skew).tocsr()
    b = rng.standard_normal(n)
    for method in ("gmres", "direct"):
        x = solve_general(A, b, SolverConfig(tol=1e-11, method=method))
        assert _residual(A, x, b) <= 1e-11 + 1e-12


def test_cg_falls_back_to_gmres_on_general_systems(spd_matrix):
    solver = LinearSolver(spd_matrix, SolverConfig(method="cg"), symmetric=False)
    assert solver.method == SolverMethod.GMRES


def test_spd_solve_rejects_asymmetric():
    A = csr_matrix(np.array([[2.0, 1.0], [0.0, 2.0]]))
    with pytest.raises(InvalidArgumentError):
        solve_spd(A, np.ones(2))
    with pytest.raises(InvalidArgumentError):
        check_symmetric(A)


def test_zero_rhs_gives_zero(spd_matrix):
    x = solve_spd(spd_matrix, np.zeros(spd_matrix.shape[0]), SolverConfig(method="cg"))
    assert not np.any(x)


def test_wrong_rhs_shape(spd_matrix):
    with pytest.raises(InvalidArgumentError):
        solve_spd(spd_matrix, np.ones(3))


def test_non_square_rejected():
    with pytest.raises(InvalidArgumentError):
        LinearSolver(np.ones((2, 3)), symmetric=False)


def test_iteration_cap_raises(mesh_1d, rng):
    space = make_space(mesh_1d, Family.CG, 4, BoundaryCondition.DIRICHLET)
    K = assemble_stiffness_grad(space)
    with pytest.raises(SolverFailureError) as info:
        solve_spd(K, rng.standard_normal(K.shape[0]), SolverConfig(tol=1e-12, method="cg", max_iter=1))
    assert info.value.iterations >= 1
    assert info.value.to_dict()["code"] == "solver-failure"


def test_indefinite_matrix_fails_cholesky():
    A = csr_matrix(np.array([[1.0, 2.0], [2.0, 1.0]]))
    with pytest.raises(SolverFailureError):
        LinearSolver(A, SolverConfig(method="direct"))


@pytest.mark.parametrize("kwargs", [{"tol": 0.0}, {"tol": 1.0}, {"max_iter": 0}, {"restart": 0}])
def test_solver_config_validation(kwargs):
    with pytest.raises(InvalidArgumentError):
        SolverConfig(**kwargs)


def test_solver_config_defaults_per_dimension():
    assert SolverConfig.for_dimension(1).method == SolverMethod.DIRECT
    assert SolverConfig.for_dimension(2).method == SolverMethod.CG
    assert SolverConfig.for_dimension(2, method="gmres").method == SolverMethod.GMRES


def _poisson(n):
    space = make_space(build_interval_mesh(0.0, 1.0, n), Family.CG, 1, BoundaryCondition.DIRICHLET)
    return space, assemble_stiffness_grad(space), assemble_load(space, lambda x: np.ones(x.shape[0]))


def test_poisson_solve_is_nodally_exact():
    space, K, load = _poisson(64)
    u = solve_spd(K, load)
    exact = interpolate(space, lambda x: x[:, 0] * (1.0 - x[:, 0]) / 2.0)
    assert np.max(np.abs(u - exact)) <= 1e-10


def test_cg_iterations_grow_with_refinement():
    counts = []
    for n in (16, 32, 64):
        _, K, load = _poisson(n)
        stats = SolverStats()
        solve_spd(K, load, SolverConfig(tol=1e-10, method=SolverMethod.CG), stats=stats)
        counts.append(stats.max_iterations)
    assert counts[0] < counts[1] < counts[2]
    assert counts[2] >= 2 * counts[0]
