from dataclasses import dataclass
from math import isfinite
from numbers import Real
from typing import Callable

import numpy as np
from scipy.sparse import coo_matrix, csr_matrix

from .quadrature import rule_for_degree
from .spaces import (
    Compatibility,
    Family,
    FunctionSpace,
    Tabulation,
    check_compatible,
    derivative_space,
)
from ..utils.error_utils import InvalidArgumentError, UnsupportedSpaceError
from ..utils.logging_utils import log

ZERO_TOL: float = 1e-14


@dataclass(frozen=True)
class MaterialParams:
    """
    Constant physical coefficients.

    rho and k_stiff drive the wave equation; epsilon and mu drive the
    transverse-mode Maxwell system.
    """

    rho: float = 1.0
    k_stiff: float = 1.0
    epsilon: float = 1.0
    mu: float = 1.0

    def __post_init__(self) -> None:
        for name in ("rho", "k_stiff", "epsilon", "mu"):
            _check_coeff(getattr(self, name), name)

    @property
    def compliance(self) -> float:
        """c = 1 / k_stiff."""
        return 1.0 / self.k_stiff

    @property
    def specific_volume(self) -> float:
        """nu = 1 / rho."""
        return 1.0 / self.rho

    @property
    def wave_speed(self) -> float:
        return (self.k_stiff / self.rho) ** 0.5

    @property
    def light_speed(self) -> float:
        return 1.0 / (self.epsilon * self.mu) ** 0.5


def _check_coeff(coeff, name: str = "coeff") -> float:
    # coefficients are scalars: spatially varying fields are not accepted
    if isinstance(coeff, bool) or not isinstance(coeff, Real):
        raise InvalidArgumentError(f"{name} must be a real scalar, got {type(coeff).__name__}")
    coeff = float(coeff)
    if not isfinite(coeff) or coeff <= 0.0:
        raise InvalidArgumentError(f"{name} must be positive and finite, got {coeff!r}")
    return coeff


def _rule(*spaces: FunctionSpace):
    return rule_for_degree(spaces[0].dim, max(s.degree for s in spaces))


def _scatter(local: np.ndarray, test: FunctionSpace, trial: FunctionSpace) -> csr_matrix:
    """Accumulate cell matrices (n_cells, n_test, n_trial) in cell order into CSR."""
    nc, nt, ns = local.shape
    rows = np.broadcast_to(test.cell_dofs[:, :, None], (nc, nt, ns)).ravel()
    cols = np.broadcast_to(trial.cell_dofs[:, None, :], (nc, nt, ns)).ravel()
    vals = local.ravel()
    keep = (rows >= 0) & (cols >= 0)
    matrix = coo_matrix(
        (vals[keep], (rows[keep], cols[keep])), shape=(test.dof_count, trial.dof_count)
    ).tocsr()
    return clean(matrix)


def clean(matrix: csr_matrix) -> csr_matrix:
    """Drop entries below the assembly tolerance and sort column indices."""
    matrix = csr_matrix(matrix)
    matrix.sum_duplicates()
    if matrix.nnz:
        scale = max(np.abs(matrix.data).max(), 1.0)
        matrix.data[np.abs(matrix.data) <= ZERO_TOL * scale] = 0.0
    matrix.eliminate_zeros()
    matrix.sort_indices()
    return matrix


def _same_mesh(test: FunctionSpace, trial: FunctionSpace) -> None:
    if test.mesh is not trial.mesh:
        raise InvalidArgumentError("spaces live on different meshes")


def _scalar_derivative(tab: Tabulation, space: FunctionSpace, operator: str) -> np.ndarray:
    if operator == "grad":
        if tab.grads is None or space.family != Family.CG:
            raise UnsupportedSpaceError(f"gradient of {space.label} is not assembled")
        return tab.grads
    if tab.divs is None:
        raise UnsupportedSpaceError(f"divergence of {space.label} is not assembled")
    return tab.divs[..., None]


def assemble_mass(space: FunctionSpace, coeff: float = 1.0) -> csr_matrix:
    """
    Mass matrix coeff * (psi_i, psi_j); vector spaces use the component-wise dot.

    :param space: Any supported space.
    :param coeff: Positive scalar coefficient.
    :return: Symmetric positive definite CSR matrix.
    """
    coeff = _check_coeff(coeff)
    tab = space.tabulate(_rule(space))
    local = coeff * np.einsum("cq,cqik,cqjk->cij", tab.dx, tab.values, tab.values)
    matrix = _scatter(local, space, space)
    log.debug(f"[ASSEMBLY] Mass on {space.label}: {matrix.shape}, nnz={matrix.nnz}")
    return matrix


def assemble_stiffness_grad(space: FunctionSpace, coeff: float = 1.0) -> csr_matrix:
    """Stiffness coeff * (grad psi_i, grad psi_j) on a continuous Lagrange space."""
    coeff = _check_coeff(coeff)
    if space.family != Family.CG:
        raise UnsupportedSpaceError(f"grad-grad stiffness needs continuous Lagrange, got {space.label}")
    tab = space.tabulate(_rule(space))
    local = coeff * np.einsum("cq,cqik,cqjk->cij", tab.dx, tab.grads, tab.grads)
    matrix = _scatter(local, space, space)
    log.debug(f"[ASSEMBLY] Grad stiffness on {space.label}: nnz={matrix.nnz}")
    return matrix


def assemble_stiffness_div(space: FunctionSpace, coeff: float = 1.0) -> csr_matrix:
    """Stiffness coeff * (div xi_i, div xi_j); 1D continuous Lagrange or 2D RT0."""
    coeff = _check_coeff(coeff)
    if not space.has_divergence:
        raise UnsupportedSpaceError(f"div-div stiffness needs an H(div) space, got {space.label}")
    tab = space.tabulate(_rule(space))
    local = coeff * np.einsum("cq,cqi,cqj->cij", tab.dx, tab.divs, tab.divs)
    matrix = _scatter(local, space, space)
    log.debug(f"[ASSEMBLY] Div stiffness on {space.label}: nnz={matrix.nnz}")
    return matrix


def assemble_coupling_grad(test_space: FunctionSpace, trial_space: FunctionSpace,
                           compatibility: Compatibility = Compatibility.EXACT) -> csr_matrix:
    """
    Gradient coupling G(e, j) = (xi_e, grad psi_j).

    :param test_space: Space of xi; by default it must be the exact gradient image.
    :param trial_space: Continuous Lagrange space of psi.
    :param compatibility: How strictly the test space is checked.
    :return: CSR matrix of shape (test dofs, trial dofs).
    """
    _same_mesh(test_space, trial_space)
    check_compatible(test_space, trial_space, "grad", compatibility)
    rule = _rule(test_space, trial_space)
    test = test_space.tabulate(rule)
    trial = trial_space.tabulate(rule)
    grads = _scalar_derivative(trial, trial_space, "grad")
    if test.values.shape[-1] != grads.shape[-1]:
        raise UnsupportedSpaceError(
            f"{test_space.label} cannot pair with gradients of {trial_space.label}"
        )
    local = np.einsum("cq,cqik,cqjk->cij", test.dx, test.values, grads)
    matrix = _scatter(local, test_space, trial_space)
    log.debug(f"[ASSEMBLY] Grad coupling {test_space.label} x {trial_space.label}: nnz={matrix.nnz}")
    return matrix


def assemble_coupling_div(test_space: FunctionSpace, trial_space: FunctionSpace,
                          compatibility: Compatibility = Compatibility.EXACT) -> csr_matrix:
    """
    Divergence coupling D(i, e) = (psi_i, div xi_e).

    :param test_space: Scalar space of psi; by default the exact divergence image.
    :param trial_space: H(div) space of xi (1D continuous Lagrange or RT0).
    """
    _same_mesh(test_space, trial_space)
    check_compatible(test_space, trial_space, "div", compatibility)
    if test_space.value_shape != "scalar":
        raise UnsupportedSpaceError(f"div coupling needs a scalar test space, got {test_space.label}")
    rule = _rule(test_space, trial_space)
    test = test_space.tabulate(rule)
    trial = trial_space.tabulate(rule)
    divs = _scalar_derivative(trial, trial_space, "div")
    local = np.einsum("cq,cqik,cqjk->cij", test.dx, test.values, divs)
    matrix = _scatter(local, test_space, trial_space)
    log.debug(f"[ASSEMBLY] Div coupling {test_space.label} x {trial_space.label}: nnz={matrix.nnz}")
    return matrix


def assemble_load(space: FunctionSpace, f: Callable[[np.ndarray], np.ndarray]) -> np.ndarray:
    """
    Load vector (psi_i, f).

    :param f: Vectorized callable taking points (n, dim) and returning (n,) for
        scalar spaces or (n, n_components) for vector spaces.
    """
    rule = rule_for_degree(space.dim, space.degree + 3)
    tab = space.tabulate(rule)
    nc, nq, dim = tab.points.shape
    fv = np.asarray(f(tab.points.reshape(-1, dim)), dtype=float)
    fv = fv.reshape(nc, nq, space.n_components)
    local = np.einsum("cq,cqik,cqk->ci", tab.dx, tab.values, fv)
    dofs = space.cell_dofs.ravel()
    keep = dofs >= 0
    return np.bincount(dofs[keep], weights=local.ravel()[keep], minlength=space.dof_count)


def interpolate(space: FunctionSpace, f: Callable[[np.ndarray], np.ndarray]) -> np.ndarray:
    """
    Canonical interpolant: nodal values for Lagrange spaces, edge fluxes
    (midpoint rule) for RT0.
    """
    if space.family == Family.RT:
        mesh = space.mesh
        mid = 0.5 * (mesh.vertices[mesh.edges[:, 0]] + mesh.vertices[mesh.edges[:, 1]])
        fv = np.asarray(f(mid), dtype=float).reshape(-1, 2)
        return np.einsum("ek,ek->e", fv, mesh.edge_normals) * mesh.edge_lengths
    values = np.asarray(f(space.node_coordinates), dtype=float)
    if space.value_shape == "vector":
        values = values.reshape(space.dof_count, -1)
        return values[np.arange(space.dof_count), space.dof_components]
    return values.reshape(space.dof_count)


def evaluate(space: FunctionSpace, coeffs: np.ndarray, tab: Tabulation) -> np.ndarray:
    """Values (n_cells, nq, n_components) of a discrete function at tabulated points."""
    coeffs = np.asarray(coeffs, dtype=float)
    if coeffs.shape != (space.dof_count,):
        raise InvalidArgumentError(f"expected {space.dof_count} coefficients, got {coeffs.shape}")
    local = np.where(space.cell_dofs >= 0, coeffs[np.maximum(space.cell_dofs, 0)], 0.0)
    return np.einsum("cqik,ci->cqk", tab.values, local)


def l2_error(space: FunctionSpace, coeffs: np.ndarray, exact: Callable[[np.ndarray], np.ndarray]) -> float:
    """L2 norm of u_h - u over the domain, with a rule three degrees above the space."""
    tab = space.tabulate(rule_for_degree(space.dim, space.degree + 3))
    uh = evaluate(space, coeffs, tab)
    nc, nq, dim = tab.points.shape
    u = np.asarray(exact(tab.points.reshape(-1, dim)), dtype=float).reshape(uh.shape)
    return float(np.sqrt(np.einsum("cq,cqk->", tab.dx, (uh - u) ** 2)))


def invert_block_diagonal(matrix: csr_matrix, space: FunctionSpace) -> csr_matrix:
    """
    Inverse of a matrix whose couplings stay inside each cell (DG masses).

    :raises UnsupportedSpaceError: if the space is not discontinuous.
    """
    if not space.block_diagonal:
        raise UnsupportedSpaceError(f"{space.label} mass is not block diagonal")
    dense_blocks = []
    for dofs in space.cell_dofs:
        block = matrix[dofs][:, dofs].toarray()
        dense_blocks.append(np.linalg.inv(block))
    local = np.stack(dense_blocks)
    return _scatter(local, space, space)


def image_operator(test_space: FunctionSpace, trial_space: FunctionSpace, operator: str = "grad") -> csr_matrix:
    """
    R = M_W^{-1} G for gradients, M_W^{-1} D for divergences.

    With an exact image test space, R maps trial coefficients to the
    coefficients of their derivative.
    """
    mass = assemble_mass(test_space)
    if operator == "grad":
        coupling = assemble_coupling_grad(test_space, trial_space)
    else:
        coupling = assemble_coupling_div(test_space, trial_space)
    return clean(invert_block_diagonal(mass, test_space) @ coupling)


def derivative_image(space: FunctionSpace, coeffs: np.ndarray) -> tuple:
    """Exact derivative of a 1D CG function (or divergence of an RT0 field) as (space, coeffs)."""
    target = derivative_space(space)
    operator = "grad" if space.family == Family.CG else "div"
    return target, image_operator(target, space, operator) @ np.asarray(coeffs, dtype=float)


def rotate_vector_rows(matrix: csr_matrix, space: FunctionSpace) -> csr_matrix:
    """
    Rotate rows of a matrix whose rows are vector DG0 DOFs by -90 degrees:
    (a_x, a_y) -> (a_y, -a_x). Applied to a gradient coupling this yields the
    scalar-to-vector curl.
    """
    if not (space.family == Family.DG and space.value_shape == "vector" and space.dim == 2):
        raise UnsupportedSpaceError(f"rotation needs a 2D vector DG space, got {space.label}")
    n = space.dof_count
    comp = space.dof_components
    rows = np.arange(n)
    partner = np.where(comp == 0, rows + 1, rows - 1)
    sign = np.where(comp == 0, 1.0, -1.0)
    rotation = csr_matrix((sign, (rows, partner)), shape=(n, n))
    return clean(rotation @ matrix)


def rt_normal_traces(space: FunctionSpace, points_per_edge: int = 3) -> np.ndarray:
    """
    Global normal trace of the basis function attached to each local edge, seen
    from the owning cell, shape (n_cells, 3, points_per_edge).

    Sample points run along the global edge orientation, so both neighbours of
    an interior edge sample the same physical points.
    """
    if space.family != Family.RT:
        raise UnsupportedSpaceError("normal traces are defined for RT0 only")
    mesh = space.mesh
    p = mesh.vertices[mesh.cells]
    area = mesh.measures
    s = np.linspace(0.1, 0.9, points_per_edge)
    traces = np.zeros((mesh.n_cells, 3, points_per_edge))
    for i in range(3):
        edge = mesh.cell_edges[:, i]
        n = mesh.edge_normals[edge]
        lower = mesh.vertices[mesh.edges[edge, 0]]
        upper = mesh.vertices[mesh.edges[edge, 1]]
        for k, t in enumerate(s):
            # same physical point seen from both neighbours
            x = lower + t * (upper - lower)
            phi = space.signs[:, i, None] * (x - p[:, i]) / (2.0 * area[:, None])
            traces[:, i, k] = np.einsum("ck,ck->c", phi, n)
    return traces


def export_rows(matrix: csr_matrix):
    """Yield (row, col, value) triplets in row-major order."""
    coo = clean(matrix).tocoo()
    order = np.lexsort((coo.col, coo.row))
    for idx in order:
        yield int(coo.row[idx]), int(coo.col[idx]), float(coo.data[idx])
