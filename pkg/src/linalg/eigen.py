from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.linalg

from .solvers import LinearSolver, SolverConfig, as_csr, check_symmetric
from ..utils.error_utils import InvalidArgumentError, SolverFailureError
from ..utils.logging_utils import log

DEFAULT_EIG_TOL: float = 1e-10
DEFAULT_EIG_ITER: int = 200000


@dataclass(frozen=True)
class EigenEstimate:
    value: float
    vector: np.ndarray
    iterations: int
    residual: float


def _iterate(apply, K, M, tol: float, max_iter: int, seed: int, label: str) -> EigenEstimate:
    n = K.shape[0]
    rng = np.random.default_rng(seed)
    x = rng.standard_normal(n)
    x /= np.sqrt(x @ (M @ x))
    lam = 0.0
    residual = np.inf
    for it in range(1, max_iter + 1):
        y = apply(x)
        norm = np.sqrt(y @ (M @ y))
        if norm == 0.0 or not np.isfinite(norm):
            raise SolverFailureError(f"{label} collapsed at iteration {it}", iterations=it)
        x = y / norm
        Kx = K @ x
        Mx = M @ x
        lam = float(x @ Kx)
        scale = max(abs(lam) * np.linalg.norm(Mx), np.linalg.norm(Kx), np.finfo(float).tiny)
        residual = float(np.linalg.norm(Kx - lam * Mx) / scale)
        if residual <= tol:
            log.debug(f"[SOLVER] {label}: lambda={lam:.12g} after {it} iterations")
            return EigenEstimate(lam, x, it, residual)
    raise SolverFailureError(
        f"{label} did not converge in {max_iter} iterations (residual {residual:.3e})",
        iterations=max_iter, residual=residual,
    )


def _prepare(K, M):
    K, M = as_csr(K), as_csr(M)
    if K.shape != M.shape or K.shape[0] != K.shape[1]:
        raise InvalidArgumentError(f"K {K.shape} and M {M.shape} must be square and equal-sized")
    check_symmetric(K)
    check_symmetric(M)
    return K, M


def power_iteration_genevp(K, M, tol: float = DEFAULT_EIG_TOL, max_iter: int = DEFAULT_EIG_ITER,
                           seed: int = 0, solver_cfg: Optional[SolverConfig] = None) -> float:
    """
    Largest generalized eigenvalue of K x = lambda M x.

    Iterates x <- M^{-1} K x in the M-norm from a seeded random start and
    stops when the eigen-residual ||K x - lambda M x|| drops below tol.

    :param K: Symmetric positive semidefinite matrix.
    :param M: Symmetric positive definite matrix.
    :return: lambda_max.
    """
    return largest_eigenpair(K, M, tol, max_iter, seed, solver_cfg).value


def largest_eigenpair(K, M, tol: float = DEFAULT_EIG_TOL, max_iter: int = DEFAULT_EIG_ITER,
                      seed: int = 0, solver_cfg: Optional[SolverConfig] = None) -> EigenEstimate:
    K, M = _prepare(K, M)
    mass = LinearSolver(M, solver_cfg, symmetric=True, label="mass")
    return _iterate(lambda x: mass(K @ x), K, M, tol, max_iter, seed, "power iteration")


def inverse_power_iteration_genevp(K, M, tol: float = DEFAULT_EIG_TOL, max_iter: int = DEFAULT_EIG_ITER,
                                   seed: int = 0, solver_cfg: Optional[SolverConfig] = None) -> float:
    """Smallest generalized eigenvalue of K x = lambda M x; K must be positive definite."""
    K, M = _prepare(K, M)
    stiffness = LinearSolver(K, solver_cfg, symmetric=True, label="stiffness")
    return _iterate(lambda x: stiffness(M @ x), K, M, tol, max_iter, seed, "inverse iteration").value


def dense_generalized_eigenvalues(K, M) -> np.ndarray:
    """All generalized eigenvalues in ascending order, from a dense solve."""
    K, M = _prepare(K, M)
    return scipy.linalg.eigh(K.toarray(), M.toarray(), eigvals_only=True)


def cfl_time_step(lambda_max: float) -> float:
    """Leapfrog stability limit 2 / sqrt(lambda_max)."""
    if not lambda_max > 0.0:
        raise InvalidArgumentError(f"lambda_max must be positive, got {lambda_max}")
    return 2.0 / np.sqrt(lambda_max)
