from dataclasses import dataclass
from functools import cached_property
from math import isfinite
from numbers import Integral
from typing import Tuple

import numpy as np

from ..utils.error_utils import InvalidArgumentError
from ..utils.logging_utils import log

MEASURE_TOL: float = 1e-12


@dataclass(frozen=True, eq=False)
class Mesh:
    """
    Interval or triangulated rectangle.

    :param dimension: 1 or 2.
    :param vertices: Coordinates, shape (n_vertices, dimension).
    :param cells: Vertex indices per cell, segments (n, 2) or triangles (n, 3).
    :param boundary: Boundary flag per vertex.
    :param extent: Bounding box, ((a, b),) or ((x0, x1), (y0, y1)).
    :param shape: Number of subdivisions per direction, (n,) or (nx, ny).
    """

    dimension: int
    vertices: np.ndarray
    cells: np.ndarray
    boundary: np.ndarray
    extent: Tuple[Tuple[float, float], ...]
    shape: Tuple[int, ...]

    def __post_init__(self) -> None:
        for array in (self.vertices, self.cells, self.boundary):
            array.setflags(write=False)
        self._validate()

    def _validate(self) -> None:
        if self.cells.min() < 0 or self.cells.max() >= self.n_vertices:
            raise InvalidArgumentError("cell references an unknown vertex")
        if self.dimension == 1:
            x = self.vertices[:, 0]
            if np.any(x[self.cells[:, 1]] <= x[self.cells[:, 0]]):
                raise InvalidArgumentError("interval cells must be sorted and non-degenerate")
            if np.any(self.cells[1:, 0] != self.cells[:-1, 1]):
                raise InvalidArgumentError("interval cells must be contiguous")
        else:
            if np.any(self.signed_areas <= 0.0):
                raise InvalidArgumentError("triangles must be positively oriented")
        total = float(self.measures.sum())
        if abs(total - self.domain_measure) > MEASURE_TOL * self.domain_measure:
            raise InvalidArgumentError(
                f"cells cover {total!r}, domain measure is {self.domain_measure!r}"
            )

    @property
    def n_vertices(self) -> int:
        return self.vertices.shape[0]

    @property
    def n_cells(self) -> int:
        return self.cells.shape[0]

    @property
    def domain_measure(self) -> float:
        return float(np.prod([hi - lo for lo, hi in self.extent]))

    @cached_property
    def signed_areas(self) -> np.ndarray:
        p = self.vertices[self.cells]
        e1 = p[:, 1] - p[:, 0]
        e2 = p[:, 2] - p[:, 0]
        return 0.5 * (e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])

    @cached_property
    def measures(self) -> np.ndarray:
        """Cell lengths (1D) or areas (2D)."""
        if self.dimension == 1:
            x = self.vertices[:, 0]
            return x[self.cells[:, 1]] - x[self.cells[:, 0]]
        return self.signed_areas

    @cached_property
    def diameters(self) -> np.ndarray:
        if self.dimension == 1:
            return self.measures
        p = self.vertices[self.cells]
        lengths = [np.linalg.norm(p[:, (i + 1) % 3] - p[:, i], axis=1) for i in range(3)]
        return np.max(np.stack(lengths, axis=1), axis=1)

    @property
    def h(self) -> float:
        """Characteristic size: the largest cell diameter."""
        return float(self.diameters.max())

    # --- edge topology (2D only) ---

    @cached_property
    def _edge_topology(self) -> Tuple[np.ndarray, np.ndarray]:
        if self.dimension != 2:
            raise InvalidArgumentError("edges are only defined on triangulations")
        # local edge i is opposite local vertex i
        local = np.stack(
            [self.cells[:, [1, 2]], self.cells[:, [2, 0]], self.cells[:, [0, 1]]], axis=1
        ).reshape(-1, 2)
        edges, inverse = np.unique(np.sort(local, axis=1), axis=0, return_inverse=True)
        return edges, np.asarray(inverse).reshape(self.n_cells, 3)

    @property
    def edges(self) -> np.ndarray:
        """Edge vertex pairs, oriented from the lower to the higher vertex index."""
        return self._edge_topology[0]

    @property
    def cell_edges(self) -> np.ndarray:
        """Global edge index of the edge opposite each local vertex, shape (n_cells, 3)."""
        return self._edge_topology[1]

    @property
    def n_edges(self) -> int:
        return self.edges.shape[0]

    @cached_property
    def boundary_edges(self) -> np.ndarray:
        counts = np.bincount(self.cell_edges.ravel(), minlength=self.n_edges)
        return counts == 1

    @cached_property
    def edge_normals(self) -> np.ndarray:
        """Unit normals of the global edges: the tangent rotated clockwise."""
        t = self.vertices[self.edges[:, 1]] - self.vertices[self.edges[:, 0]]
        n = np.stack([t[:, 1], -t[:, 0]], axis=1)
        return n / np.linalg.norm(n, axis=1, keepdims=True)

    @cached_property
    def edge_lengths(self) -> np.ndarray:
        t = self.vertices[self.edges[:, 1]] - self.vertices[self.edges[:, 0]]
        return np.linalg.norm(t, axis=1)


def _check_count(name: str, value) -> int:
    if isinstance(value, bool) or not isinstance(value, Integral) or value < 1:
        raise InvalidArgumentError(f"{name} must be a positive integer, got {value!r}")
    return int(value)


def _check_bounds(name: str, lo, hi) -> Tuple[float, float]:
    lo, hi = float(lo), float(hi)
    if not (isfinite(lo) and isfinite(hi)):
        raise InvalidArgumentError(f"{name} bounds must be finite, got ({lo}, {hi})")
    if lo >= hi:
        raise InvalidArgumentError(f"{name} bounds must satisfy a < b, got ({lo}, {hi})")
    return lo, hi


def build_interval_mesh(a: float, b: float, n: int) -> Mesh:
    """
    Uniform mesh of [a, b] with n cells.

    :param a: Left endpoint.
    :param b: Right endpoint, b > a.
    :param n: Number of cells, n >= 1.
    :return: 1D Mesh with both endpoints flagged as boundary.
    """
    a, b = _check_bounds("interval", a, b)
    n = _check_count("n", n)
    x = np.linspace(a, b, n + 1)
    cells = np.stack([np.arange(n), np.arange(1, n + 1)], axis=1)
    boundary = np.zeros(n + 1, dtype=bool)
    boundary[[0, -1]] = True
    mesh = Mesh(1, x.reshape(-1, 1), cells, boundary, ((a, b),), (n,))
    log.debug(f"[MESH] Interval [{a}, {b}] with {n} cells, h={mesh.h:.6g}")
    return mesh


def build_rect_mesh(x_extent: Tuple[float, float], y_extent: Tuple[float, float], nx: int, ny: int) -> Mesh:
    """
    Structured triangulation of a rectangle.

    Every grid quad is split along its lower-left to upper-right diagonal, so the
    mesh has 2*nx*ny triangles. Vertex (i, j) has index j*(nx+1) + i.
    """
    x0, x1 = _check_bounds("x", *x_extent)
    y0, y1 = _check_bounds("y", *y_extent)
    nx = _check_count("nx", nx)
    ny = _check_count("ny", ny)

    xs = np.linspace(x0, x1, nx + 1)
    ys = np.linspace(y0, y1, ny + 1)
    gx, gy = np.meshgrid(xs, ys)
    vertices = np.stack([gx.ravel(), gy.ravel()], axis=1)

    i, j = np.meshgrid(np.arange(nx), np.arange(ny))
    v00 = (j * (nx + 1) + i).ravel()
    v10 = v00 + 1
    v01 = v00 + nx + 1
    v11 = v01 + 1
    lower = np.stack([v00, v10, v11], axis=1)
    upper = np.stack([v00, v11, v01], axis=1)
    cells = np.stack([lower, upper], axis=1).reshape(-1, 3)

    ii = np.tile(np.arange(nx + 1), ny + 1)
    jj = np.repeat(np.arange(ny + 1), nx + 1)
    boundary = (ii == 0) | (ii == nx) | (jj == 0) | (jj == ny)

    mesh = Mesh(2, vertices, cells, boundary, ((x0, x1), (y0, y1)), (nx, ny))
    log.debug(f"[MESH] Rectangle {nx}x{ny}, {mesh.n_cells} triangles, h={mesh.h:.6g}")
    return mesh
