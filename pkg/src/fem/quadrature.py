from dataclasses import dataclass
from math import factorial

import numpy as np

from ..utils.error_utils import InvalidArgumentError


@dataclass(frozen=True)
class QuadratureRule:
    """
    Quadrature on a reference cell.

    points are reference coordinates with shape (nq, dim); weights sum to the
    reference measure (1 for [0, 1], 1/2 for the unit triangle).
    """

    points: np.ndarray
    weights: np.ndarray
    order: int

    def __post_init__(self) -> None:
        if self.points.ndim != 2 or self.points.shape[0] != self.weights.shape[0]:
            raise InvalidArgumentError("quadrature points and weights do not match")
        if np.any(self.weights <= 0.0):
            raise InvalidArgumentError("quadrature weights must be positive")

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    def __len__(self) -> int:
        return self.weights.shape[0]


def gauss_interval(n_points: int) -> QuadratureRule:
    """
    Gauss-Legendre rule with n_points nodes mapped to [0, 1].

    :param n_points: Number of nodes (exact up to degree 2*n_points - 1).
    :return: QuadratureRule on the reference interval.
    """
    if n_points < 1:
        raise InvalidArgumentError(f"need at least one Gauss point, got {n_points}")
    nodes, weights = np.polynomial.legendre.leggauss(n_points)
    return QuadratureRule(
        points=(0.5 * (nodes + 1.0)).reshape(-1, 1),
        weights=0.5 * weights,
        order=2 * n_points - 1,
    )


# Symmetric 6-point rule on the unit triangle, exact to degree 4
_TRI_A1 = 0.445948490915965
_TRI_W1 = 0.223381589678011
_TRI_A2 = 0.091576213509771
_TRI_W2 = 0.109951743655322


def triangle_rule() -> QuadratureRule:
    """Degree-4 symmetric rule on the reference triangle (0,0), (1,0), (0,1)."""
    b1 = 1.0 - 2.0 * _TRI_A1
    b2 = 1.0 - 2.0 * _TRI_A2
    bary = np.array([
        [b1, _TRI_A1, _TRI_A1],
        [_TRI_A1, b1, _TRI_A1],
        [_TRI_A1, _TRI_A1, b1],
        [b2, _TRI_A2, _TRI_A2],
        [_TRI_A2, b2, _TRI_A2],
        [_TRI_A2, _TRI_A2, b2],
    ])
    weights = np.array([_TRI_W1] * 3 + [_TRI_W2] * 3)
    weights = weights / weights.sum()
    return QuadratureRule(points=bary[:, 1:].copy(), weights=0.5 * weights, order=4)


def rule_for_degree(dim: int, degree: int) -> QuadratureRule:
    """
    Rule used for a polynomial space of the given degree: 2k+1 Gauss points in
    1D, the degree-4 rule on triangles.

    :param dim: Topological dimension (1 or 2).
    :param degree: Polynomial degree k of the space.
    """
    if dim == 1:
        return gauss_interval(2 * degree + 1)
    if dim == 2:
        return triangle_rule()
    raise InvalidArgumentError(f"no quadrature for dimension {dim}")


def monomial_integral(exponents: tuple) -> float:
    """
    Exact integral of a monomial over the reference cell.

    (a,) over [0, 1] gives 1/(a+1); (a, b) over the unit triangle gives
    a! b! / (a+b+2)!.
    """
    if len(exponents) == 1:
        return 1.0 / (exponents[0] + 1)
    a, b = exponents
    return factorial(a) * factorial(b) / factorial(a + b + 2)


def integrate_monomial(rule: QuadratureRule, exponents: tuple) -> float:
    values = np.ones(len(rule))
    for axis, power in enumerate(exponents):
        values = values * rule.points[:, axis] ** power
    return float(values @ rule.weights)
