from dataclasses import dataclass
from enum import Enum
from functools import cached_property
from typing import Optional

import numpy as np

from .mesh import Mesh
from .quadrature import QuadratureRule
from ..utils.error_utils import (
    CompatibilityViolationError,
    InvalidArgumentError,
    UnsupportedSpaceError,
)
from ..utils.logging_utils import log

MAX_DEGREE_1D: int = 4


class Family(str, Enum):
    CG = "continuous-lagrange"
    DG = "discontinuous-lagrange"
    RT = "raviart-thomas-0"


class BoundaryCondition(str, Enum):
    NONE = "none"
    DIRICHLET = "homogeneous-dirichlet"


class Compatibility(str, Enum):
    """How strictly a coupling checks its test space against the image of the trial space."""

    EXACT = "exact"          # test space is the image of the differential operator
    INCLUSION = "inclusion"  # test space contains the image
    NONE = "none"


@dataclass(frozen=True)
class Tabulation:
    """
    Basis data of every cell at the quadrature points.

    values: (n_cells, nq, n_local, n_components)
    grads:  (n_cells, nq, n_local, dim) for scalar spaces, else None
    divs:   (n_cells, nq, n_local) for spaces with a divergence, else None
    dx:     (n_cells, nq) quadrature weights times the cell Jacobian
    points: (n_cells, nq, dim) physical quadrature points
    """

    values: np.ndarray
    grads: Optional[np.ndarray]
    divs: Optional[np.ndarray]
    dx: np.ndarray
    points: np.ndarray


def _lagrange_nodes(degree: int) -> np.ndarray:
    if degree == 0:
        return np.array([0.5])
    return np.arange(degree + 1) / degree


def _lagrange_coefficients(degree: int) -> np.ndarray:
    """Monomial coefficients of the reference Lagrange basis, column i is basis i."""
    nodes = _lagrange_nodes(degree)
    vander = np.vander(nodes, degree + 1, increasing=True)
    return np.linalg.inv(vander)


def _eval_lagrange_1d(degree: int, xi: np.ndarray):
    coeffs = _lagrange_coefficients(degree)
    powers = np.vander(xi, degree + 1, increasing=True)
    values = powers @ coeffs
    if degree == 0:
        return values, np.zeros_like(values)
    dcoeffs = coeffs[1:] * np.arange(1, degree + 1)[:, None]
    dvalues = np.vander(xi, degree, increasing=True) @ dcoeffs
    return values, dvalues


@dataclass(frozen=True, eq=False)
class FunctionSpace:
    """
    Finite element space over a mesh.

    cell_dofs maps (cell, local basis) to the global DOF index, or -1 for DOFs
    removed by a homogeneous Dirichlet condition. RT0 local basis i belongs to
    the edge opposite local vertex i and carries the sign relating the local
    outward normal to the global edge normal.
    """

    mesh: Mesh
    family: Family
    degree: int
    bc: BoundaryCondition
    value_shape: str
    cell_dofs: np.ndarray
    dof_count: int
    signs: Optional[np.ndarray] = None

    @property
    def dim(self) -> int:
        return self.mesh.dimension

    @property
    def n_components(self) -> int:
        return self.dim if self.value_shape == "vector" else 1

    @property
    def n_local(self) -> int:
        return self.cell_dofs.shape[1]

    @property
    def is_lagrange(self) -> bool:
        return self.family in (Family.CG, Family.DG)

    @property
    def block_diagonal(self) -> bool:
        """True when the mass matrix couples DOFs of one cell only."""
        return self.family == Family.DG

    @property
    def has_divergence(self) -> bool:
        return self.family == Family.RT or (self.dim == 1 and self.family == Family.CG)

    @property
    def label(self) -> str:
        short = {Family.CG: "CG", Family.DG: "DG", Family.RT: "RT"}[self.family]
        suffix = "-vec" if self.value_shape == "vector" and self.family != Family.RT else ""
        bc = "/D" if self.bc == BoundaryCondition.DIRICHLET else ""
        return f"{short}{self.degree}{suffix}{bc}"

    def same_as(self, other: "FunctionSpace") -> bool:
        return (
            self.mesh is other.mesh
            and self.family == other.family
            and self.degree == other.degree
            and self.bc == other.bc
            and self.value_shape == other.value_shape
        )

    # --- reference data ---

    def _reference(self, xi: np.ndarray):
        """Reference values (nq, n_local, ncomp) and reference derivatives."""
        if self.dim == 1:
            values, dvalues = _eval_lagrange_1d(self.degree, xi[:, 0])
            return values[:, :, None], dvalues[:, :, None]
        x, y = xi[:, 0], xi[:, 1]
        nq = xi.shape[0]
        if self.family == Family.CG:
            values = np.stack([1.0 - x - y, x, y], axis=1)[:, :, None]
            grads = np.broadcast_to(
                np.array([[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]]), (nq, 3, 2)
            )
            return values, grads
        if self.value_shape == "vector":
            values = np.broadcast_to(np.eye(2), (nq, 2, 2))
            return values, np.zeros((nq, 2, 2))
        return np.ones((nq, 1, 1)), np.zeros((nq, 1, 2))

    def tabulate(self, rule: QuadratureRule) -> Tabulation:
        """
        Evaluate the basis on every cell at the points of a reference rule.

        :param rule: Quadrature rule on the reference cell of this mesh.
        :return: Tabulation with physical values, derivatives and weights.
        """
        if rule.dim != self.dim:
            raise InvalidArgumentError(f"{rule.dim}D rule on a {self.dim}D space")
        mesh = self.mesh
        xi = rule.points
        if self.dim == 1:
            x0 = mesh.vertices[mesh.cells[:, 0], 0]
            h = mesh.measures
            points = (x0[:, None] + h[:, None] * xi[None, :, 0])[:, :, None]
            dx = h[:, None] * rule.weights[None, :]
            ref_values, ref_derivs = self._reference(xi)
            values = np.broadcast_to(ref_values, (mesh.n_cells,) + ref_values.shape)
            grads = ref_derivs[None, :, :, :] / h[:, None, None, None]
            divs = grads[..., 0] if self.has_divergence else None
            return Tabulation(values, grads, divs, dx, points)

        p = mesh.vertices[mesh.cells]
        jac = np.stack([p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]], axis=2)
        det = jac[:, 0, 0] * jac[:, 1, 1] - jac[:, 0, 1] * jac[:, 1, 0]
        points = p[:, None, 0, :] + np.einsum("cij,qj->cqi", jac, xi)
        dx = det[:, None] * rule.weights[None, :]

        if self.family == Family.RT:
            area = 0.5 * det
            # phi_i = s_i (x - P_i) / (2|T|), div phi_i = s_i / |T|
            diff = points[:, :, None, :] - p[:, None, :, :]
            scale = self.signs / (2.0 * area[:, None])
            values = diff * scale[:, None, :, None]
            divs = np.broadcast_to((self.signs / area[:, None])[:, None, :], values.shape[:3])
            return Tabulation(values, None, divs, dx, points)

        ref_values, ref_grads = self._reference(xi)
        values = np.broadcast_to(ref_values, (mesh.n_cells,) + ref_values.shape)
        if self.value_shape == "vector":
            return Tabulation(values, None, None, dx, points)
        inv_t = np.linalg.inv(jac).transpose(0, 2, 1)
        grads = np.einsum("cij,qlj->cqli", inv_t, ref_grads)
        return Tabulation(values, grads, None, dx, points)

    @cached_property
    def node_coordinates(self) -> np.ndarray:
        """Coordinates of the free Lagrange nodes, one row per global DOF."""
        if not self.is_lagrange:
            raise UnsupportedSpaceError(f"{self.label} has no nodal DOFs")
        mesh = self.mesh
        coords = np.zeros((self.dof_count, self.dim))
        if self.dim == 1:
            x0 = mesh.vertices[mesh.cells[:, 0], 0]
            local = x0[:, None] + mesh.measures[:, None] * _lagrange_nodes(self.degree)[None, :]
            local = local[:, :, None]
        elif self.family == Family.CG:
            local = mesh.vertices[mesh.cells]
        else:
            centroid = mesh.vertices[mesh.cells].mean(axis=1)
            local = np.repeat(centroid[:, None, :], self.n_local, axis=1)
        mask = self.cell_dofs >= 0
        coords[self.cell_dofs[mask]] = local[mask]
        return coords

    @cached_property
    def dof_components(self) -> np.ndarray:
        """Component index carried by each DOF of a vector Lagrange space (0 for scalars)."""
        comp = np.zeros(self.dof_count, dtype=int)
        if self.value_shape == "vector" and self.is_lagrange:
            local = np.broadcast_to(np.arange(self.n_local), self.cell_dofs.shape)
            mask = self.cell_dofs >= 0
            comp[self.cell_dofs[mask]] = local[mask]
        return comp


# --- construction ---

def _number_free(global_dofs: np.ndarray, fixed: np.ndarray) -> tuple:
    """Renumber global DOFs skipping the fixed ones; fixed DOFs map to -1."""
    n_total = fixed.shape[0]
    renumber = -np.ones(n_total, dtype=int)
    free = ~fixed
    renumber[free] = np.arange(int(free.sum()))
    return renumber[global_dofs], int(free.sum())


def _cg_1d(mesh: Mesh, k: int, dirichlet: bool):
    nc = mesh.n_cells
    dofs = np.arange(nc)[:, None] * k + np.arange(k + 1)[None, :]
    n_total = nc * k + 1
    fixed = np.zeros(n_total, dtype=bool)
    if dirichlet:
        fixed[[0, -1]] = True
    return _number_free(dofs, fixed)


def _cg_2d(mesh: Mesh, dirichlet: bool):
    fixed = mesh.boundary.copy() if dirichlet else np.zeros(mesh.n_vertices, dtype=bool)
    return _number_free(mesh.cells, fixed)


def _rt_signs(mesh: Mesh) -> np.ndarray:
    c = mesh.cells
    # local edge i runs P_{i+1} -> P_{i+2} counter-clockwise; it agrees with the
    # global orientation when that is from the lower to the higher index
    nxt = c[:, [1, 2, 0]]
    nxt2 = c[:, [2, 0, 1]]
    return np.where(nxt < nxt2, 1.0, -1.0)


def make_space(mesh: Mesh, family, degree: int, bc=BoundaryCondition.NONE, value_shape: str = "scalar") -> FunctionSpace:
    """
    Build a finite element space.

    Supported: 1D continuous Lagrange k=1..4 and discontinuous Lagrange k=0..4;
    2D continuous Lagrange k=1, discontinuous Lagrange k=0 (scalar or vector)
    and lowest-order Raviart-Thomas.

    :param mesh: Mesh the space lives on.
    :param family: Family or its string id.
    :param degree: Polynomial degree (RT0 uses 0).
    :param bc: Boundary condition; Dirichlet only for continuous Lagrange.
    :param value_shape: "scalar" or "vector" (vector only for 2D DG0).
    :return: FunctionSpace with its local-to-global map.
    """
    try:
        family = Family(family)
        bc = BoundaryCondition(bc)
    except ValueError as e:
        raise UnsupportedSpaceError(str(e)) from e
    dirichlet = bc == BoundaryCondition.DIRICHLET
    combo = f"{family.value} degree {degree} ({value_shape}, {bc.value}) in {mesh.dimension}D"

    if dirichlet and family != Family.CG:
        raise UnsupportedSpaceError(f"Dirichlet elimination needs continuous Lagrange: {combo}")
    if value_shape not in ("scalar", "vector"):
        raise UnsupportedSpaceError(f"unknown value shape: {combo}")

    signs = None
    if mesh.dimension == 1:
        if value_shape != "scalar" or family == Family.RT:
            raise UnsupportedSpaceError(f"unsupported space: {combo}")
        if family == Family.CG and 1 <= degree <= MAX_DEGREE_1D:
            cell_dofs, count = _cg_1d(mesh, degree, dirichlet)
        elif family == Family.DG and 0 <= degree <= MAX_DEGREE_1D:
            cell_dofs = np.arange(mesh.n_cells * (degree + 1)).reshape(mesh.n_cells, degree + 1)
            count = cell_dofs.size
        else:
            raise UnsupportedSpaceError(f"unsupported space: {combo}")
    else:
        if family == Family.CG and degree == 1 and value_shape == "scalar":
            cell_dofs, count = _cg_2d(mesh, dirichlet)
        elif family == Family.DG and degree == 0:
            width = 2 if value_shape == "vector" else 1
            cell_dofs = np.arange(mesh.n_cells * width).reshape(mesh.n_cells, width)
            count = cell_dofs.size
        elif family == Family.RT and degree == 0 and value_shape == "vector":
            cell_dofs = mesh.cell_edges.copy()
            count = mesh.n_edges
            signs = _rt_signs(mesh)
        else:
            raise UnsupportedSpaceError(f"unsupported space: {combo}")

    cell_dofs.setflags(write=False)
    space = FunctionSpace(mesh, family, degree, bc, value_shape, cell_dofs, count, signs)
    log.debug(f"[SPACE] {space.label} on {mesh.n_cells} cells: {count} DOFs")
    return space


def derivative_space(space: FunctionSpace) -> FunctionSpace:
    """
    Exact image of the space under its differential operator.

    1D CG-k maps to DG-(k-1) (derivative); 2D RT0 maps to DG0 (divergence).
    """
    if space.dim == 1 and space.family == Family.CG:
        return make_space(space.mesh, Family.DG, space.degree - 1)
    if space.dim == 2 and space.family == Family.RT:
        return make_space(space.mesh, Family.DG, 0)
    raise UnsupportedSpaceError(f"{space.label} has no representable derivative image")


def check_compatible(test: FunctionSpace, trial: FunctionSpace, operator: str,
                     mode: Compatibility = Compatibility.EXACT) -> None:
    """
    Check that test pairs with the image of trial under operator ("grad" or "div").

    :raises CompatibilityViolationError: when the pairing violates the mode.
    """
    mode = Compatibility(mode)
    if test.mesh is not trial.mesh:
        raise CompatibilityViolationError("coupled spaces live on different meshes")
    if operator == "grad" and trial.family != Family.CG:
        raise UnsupportedSpaceError(f"gradient of {trial.label} is not defined")
    if operator == "div" and not trial.has_divergence:
        raise UnsupportedSpaceError(f"divergence of {trial.label} is not defined")
    if mode == Compatibility.NONE:
        return

    if mode == Compatibility.EXACT:
        try:
            image = derivative_space(trial)
        except UnsupportedSpaceError as e:
            raise CompatibilityViolationError(f"{trial.label} has no exact {operator} image") from e
        if not test.same_as(image):
            raise CompatibilityViolationError(
                f"{operator} coupling needs test space {image.label}, got {test.label}"
            )
        return

    # inclusion: piecewise polynomials of sufficient degree and the right shape
    want_shape = "vector" if operator == "grad" and trial.dim == 2 else "scalar"
    ok = (
        test.family == Family.DG
        and test.value_shape == want_shape
        and test.degree >= max(trial.degree - 1, 0)
    )
    if not ok:
        raise CompatibilityViolationError(
            f"{test.label} does not contain the {operator} of {trial.label}"
        )
