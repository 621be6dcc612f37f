from dataclasses import dataclass
from enum import Enum
from math import ceil
from typing import Callable, Optional

import numpy as np
import scipy.linalg
import scipy.sparse.linalg as spla
from scipy.sparse import csr_matrix, issparse

from ..utils.error_utils import InvalidArgumentError, SolverFailureError
from ..utils.logging_utils import log

SYMMETRY_TOL: float = 1e-13
MAX_REFINEMENTS: int = 3


class SolverMethod(str, Enum):
    CG = "cg"
    GMRES = "gmres"
    DIRECT = "direct"


@dataclass(frozen=True)
class SolverConfig:
    """
    Linear solver settings.

    :param tol: Relative residual tolerance, 0 < tol < 1.
    :param max_iter: Iteration cap of the Krylov methods.
    :param method: CG, GMRES or a direct (banded Cholesky / sparse LU) factorization.
    :param restart: GMRES restart length.
    """

    tol: float = 1e-12
    max_iter: int = 10000
    method: SolverMethod = SolverMethod.DIRECT
    restart: int = 50

    def __post_init__(self) -> None:
        object.__setattr__(self, "method", SolverMethod(self.method))
        if not 0.0 < self.tol < 1.0:
            raise InvalidArgumentError(f"solver tolerance must lie in (0, 1), got {self.tol}")
        if self.max_iter < 1:
            raise InvalidArgumentError(f"max_iter must be >= 1, got {self.max_iter}")
        if self.restart < 1:
            raise InvalidArgumentError(f"restart must be >= 1, got {self.restart}")

    @classmethod
    def for_dimension(cls, dim: int, **overrides) -> "SolverConfig":
        """Default method per dimension: direct in 1D, CG in 2D."""
        overrides.setdefault("method", SolverMethod.DIRECT if dim == 1 else SolverMethod.CG)
        return cls(**overrides)


@dataclass
class SolverStats:
    """Accumulated solver statistics of one run."""

    solves: int = 0
    iterations: int = 0
    max_iterations: int = 0
    max_residual: float = 0.0

    def record(self, iterations: int, residual: float) -> None:
        self.solves += 1
        self.iterations += iterations
        self.max_iterations = max(self.max_iterations, iterations)
        self.max_residual = max(self.max_residual, residual)

    def to_dict(self) -> dict:
        return {
            "solves": self.solves,
            "iterations": self.iterations,
            "max_iterations": self.max_iterations,
            "max_residual": self.max_residual,
        }


def as_csr(matrix) -> csr_matrix:
    if issparse(matrix):
        return csr_matrix(matrix)
    return csr_matrix(np.atleast_2d(np.asarray(matrix, dtype=float)))


def check_symmetric(matrix: csr_matrix, tol: float = SYMMETRY_TOL) -> None:
    scale = max(1.0, abs(matrix).max()) if matrix.nnz else 1.0
    diff = matrix - matrix.T
    asym = abs(diff).max() if diff.nnz else 0.0
    if asym > tol * scale:
        raise InvalidArgumentError(f"matrix is not symmetric (max |A - A^T| = {asym:.3e})")


def _banded_upper(matrix: csr_matrix) -> np.ndarray:
    coo = matrix.tocoo()
    upper = coo.col >= coo.row
    rows, cols, vals = coo.row[upper], coo.col[upper], coo.data[upper]
    u = int((cols - rows).max()) if rows.size else 0
    ab = np.zeros((u + 1, matrix.shape[0]))
    ab[u + rows - cols, cols] = vals
    return ab


class LinearSolver:
    """
    Solver for repeated right-hand sides with one matrix.

    Direct methods factorize once at construction. Every accepted solution
    satisfies ||A x - b|| <= tol ||b|| up to the round-off floor of evaluating
    A x; otherwise SolverFailureError is raised.
    """

    def __init__(self, matrix, cfg: Optional[SolverConfig] = None, symmetric: bool = True,
                 stats: Optional[SolverStats] = None, label: str = "") -> None:
        self.matrix = as_csr(matrix)
        self.cfg = cfg or SolverConfig()
        self.symmetric = symmetric
        self.stats = stats
        self.label = label
        n, m = self.matrix.shape
        if n != m:
            raise InvalidArgumentError(f"matrix must be square, got {self.matrix.shape}")
        if symmetric:
            check_symmetric(self.matrix)
        self.method = self.cfg.method
        if not symmetric and self.method == SolverMethod.CG:
            self.method = SolverMethod.GMRES
        self._abs = abs(self.matrix)
        self._direct: Optional[Callable[[np.ndarray], np.ndarray]] = None
        if self.method == SolverMethod.DIRECT:
            self._direct = self._factorize()

    def _factorize(self) -> Callable[[np.ndarray], np.ndarray]:
        try:
            if self.symmetric:
                factor = scipy.linalg.cholesky_banded(_banded_upper(self.matrix), lower=False)
                return lambda b: scipy.linalg.cho_solve_banded((factor, False), b)
            lu = spla.splu(self.matrix.tocsc())
            return lu.solve
        except (np.linalg.LinAlgError, RuntimeError, ValueError) as e:
            raise SolverFailureError(f"{self.label or 'matrix'} factorization failed: {e}") from e

    def _krylov(self, rhs: np.ndarray):
        count = [0]

        def callback(_):
            count[0] += 1

        cfg = self.cfg
        try:
            if self.method == SolverMethod.CG:
                x, info = spla.cg(self.matrix, rhs, rtol=cfg.tol, atol=0.0,
                                  maxiter=cfg.max_iter, callback=callback)
            else:
                x, info = spla.gmres(self.matrix, rhs, rtol=cfg.tol, atol=0.0,
                                     restart=cfg.restart, maxiter=ceil(cfg.max_iter / cfg.restart),
                                     callback=callback, callback_type="pr_norm")
        except (np.linalg.LinAlgError, ValueError, ZeroDivisionError) as e:
            raise SolverFailureError(f"{self.method.value} broke down: {e}", iterations=count[0]) from e
        return x, info, count[0]

    def _raw_solve(self, rhs: np.ndarray):
        if self._direct is not None:
            return self._direct(rhs), 0, 1
        return self._krylov(rhs)

    def _residual(self, x: np.ndarray, rhs: np.ndarray):
        r = rhs - self.matrix @ x
        floor = 64.0 * np.finfo(float).eps * np.linalg.norm(self._abs @ np.abs(x))
        return r, np.linalg.norm(r), floor

    def solve(self, rhs) -> np.ndarray:
        rhs = np.asarray(rhs, dtype=float)
        if rhs.shape != (self.matrix.shape[0],):
            raise InvalidArgumentError(f"right-hand side has shape {rhs.shape}, expected ({self.matrix.shape[0]},)")
        b_norm = np.linalg.norm(rhs)
        if b_norm == 0.0:
            return np.zeros_like(rhs)

        x, info, iterations = self._raw_solve(rhs)
        total = iterations
        if not np.all(np.isfinite(x)):
            raise SolverFailureError(f"{self.label or 'solve'} produced non-finite values", iterations=total)
        r, res, floor = self._residual(x, rhs)
        target = self.cfg.tol * b_norm + floor
        refinements = 0
        while res > target and refinements < MAX_REFINEMENTS:
            dx, _, it = self._raw_solve(r)
            total += it
            if not np.all(np.isfinite(dx)):
                break
            x = x + dx
            r, res, floor = self._residual(x, rhs)
            target = self.cfg.tol * b_norm + floor
            refinements += 1

        relative = res / b_norm
        if res > target:
            log.error(f"[SOLVER] {self.method.value} on {self.label or 'system'} failed: "
                      f"residual {relative:.3e} after {total} iterations")
            raise SolverFailureError(
                f"{self.method.value} did not reach tol {self.cfg.tol:.1e} "
                f"(relative residual {relative:.3e})",
                iterations=total, residual=float(relative),
            )
        if info > 0:
            log.warning(f"[SOLVER] {self.method.value} hit its iteration cap but the true residual passes")
        if self.stats is not None:
            self.stats.record(total, float(relative))
        log.debug(f"[SOLVER] {self.method.value} {self.label}: {total} it, residual {relative:.2e}")
        return x

    __call__ = solve


def solve_spd(matrix, rhs, cfg: Optional[SolverConfig] = None, stats: Optional[SolverStats] = None) -> np.ndarray:
    """
    Solve a symmetric positive definite system.

    :param matrix: Symmetric (checked to 1e-13 relative) positive definite matrix.
    :param rhs: Right-hand side.
    :param cfg: Method CG or DIRECT (banded Cholesky); GMRES is accepted too.
    :raises InvalidArgumentError: on asymmetric input.
    :raises SolverFailureError: if the residual contract is not met.
    """
    return LinearSolver(matrix, cfg, symmetric=True, stats=stats, label="spd").solve(rhs)


def solve_general(matrix, rhs, cfg: Optional[SolverConfig] = None, stats: Optional[SolverStats] = None) -> np.ndarray:
    """
    Solve a square nonsingular system with restarted GMRES or sparse LU.

    A CG method in cfg is replaced by GMRES.
    """
    return LinearSolver(matrix, cfg, symmetric=False, stats=stats, label="general").solve(rhs)
