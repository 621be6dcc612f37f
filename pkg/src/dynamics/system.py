from dataclasses import dataclass, field
from enum import Enum
from typing import Mapping, Optional, Tuple

import scipy.sparse.linalg as spla
from scipy.sparse import bmat, csr_matrix, identity

from ..fem.assembly import MaterialParams, clean, invert_block_diagonal
from ..fem.spaces import FunctionSpace
from ..linalg.solvers import as_csr
from ..utils.error_utils import InvalidArgumentError


class Structure(str, Enum):
    """
    Algebraic shape of a semi-discrete system.

    SECOND_ORDER:  M x'' = -K x
    CANONICAL:     M v' = -K q,  q' = v
    MIXED:         M1 x1' = B x2,  M2 x2' = -B^T x1
    THREE_FIELD:   Mv v' = D s,  q' = v,  Ms s = -D^T q
    """

    SECOND_ORDER = "second-order"
    CANONICAL = "canonical"
    MIXED = "mixed"
    THREE_FIELD = "three-field"


@dataclass(frozen=True, eq=False)
class DiscreteSystem:
    """
    Assembled blocks of one formulation plus its state layout.

    fields lists the evolved vectors in order (x1 before x2 for mixed systems).
    For second-order systems, half_step_leapfrog marks a field that lives at
    half steps under an explicit scheme (the rate of a first-order pair).
    """

    kind: str
    structure: Structure
    fields: Tuple[str, ...]
    blocks: Mapping[str, csr_matrix]
    spaces: Mapping[str, FunctionSpace] = field(default_factory=dict)
    material: MaterialParams = field(default_factory=MaterialParams)
    half_step_leapfrog: bool = False
    momentum: bool = False
    eliminate: Optional[str] = None

    def __post_init__(self) -> None:
        required = {
            Structure.SECOND_ORDER: ("M", "K"),
            Structure.CANONICAL: ("M", "K"),
            Structure.MIXED: ("M1", "M2", "B"),
            Structure.THREE_FIELD: ("Mv", "Ms", "D"),
        }[self.structure]
        missing = [name for name in required if name not in self.blocks]
        if missing:
            raise InvalidArgumentError(f"{self.kind}: missing blocks {missing}")
        object.__setattr__(self, "blocks", {k: clean(v) for k, v in self.blocks.items()})
        object.__setattr__(self, "_inverse_cache", {})

    def block(self, name: str) -> csr_matrix:
        return self.blocks[name]

    def size(self, name: str) -> int:
        """Number of DOFs of an evolved field."""
        return self.mass_of(name).shape[0]

    def mass_of(self, name: str) -> csr_matrix:
        """Mass matrix weighting the named field in the energy."""
        s = self.structure
        if s == Structure.SECOND_ORDER:
            return self.blocks["M"]
        if s == Structure.CANONICAL:
            return self.blocks["M"]
        if s == Structure.MIXED:
            return self.blocks["M1"] if name == self.fields[0] else self.blocks["M2"]
        return self.blocks["Ms"] if name == "sigma" else self.blocks["Mv"]

    def inverse_mass(self, name: str) -> csr_matrix:
        """Explicit inverse of a mass block: block-wise for DG spaces, sparse LU otherwise."""
        cache = self._inverse_cache
        if name not in cache:
            mass = self.mass_of(name)
            space = self.spaces.get(name)
            if space is not None and space.block_diagonal:
                cache[name] = invert_block_diagonal(mass, space)
            else:
                cache[name] = clean(as_csr(spla.inv(mass.tocsc())))
        return cache[name]

    def skew_operator(self) -> Tuple[csr_matrix, csr_matrix]:
        """
        (Mass, J) of the first-order form Mass x' = J x for mixed and canonical
        systems, with x stacked in field order.
        """
        b = self.blocks
        if self.structure == Structure.MIXED:
            mass = bmat([[b["M1"], None], [None, b["M2"]]], format="csr")
            J = bmat([[None, b["B"]], [-b["B"].T, None]], format="csr")
            return mass, J
        if self.structure == Structure.CANONICAL:
            n = b["M"].shape[0]
            mass = bmat([[b["M"], None], [None, identity(n)]], format="csr")
            J = bmat([[None, -b["K"]], [identity(n), None]], format="csr")
            return mass, J
        raise InvalidArgumentError(f"{self.kind} has no two-field first-order form")

    def second_order_pair(self) -> Tuple[csr_matrix, csr_matrix]:
        """
        (M, K) of a second-order equation satisfied by one evolved field.

        Its top generalized eigenvalue sets the explicit stability limit. For
        first-order systems the field whose partner has the block-diagonal
        mass is kept, so K stays sparse; the nonzero spectrum is the same for
        either choice.
        """
        b = self.blocks
        if self.structure in (Structure.SECOND_ORDER, Structure.CANONICAL):
            return b["M"], b["K"]
        if self.structure == Structure.MIXED:
            x1, x2 = self.fields
            B = b["B"]
            if self.eliminate == x1:
                return b["M2"], _symmetrized(B.T @ self.inverse_mass(x1) @ B)
            return b["M1"], _symmetrized(B @ self.inverse_mass(x2) @ B.T)
        return b["Ms"], _symmetrized(b["D"].T @ self.inverse_mass("v") @ b["D"])


def _symmetrized(matrix) -> csr_matrix:
    return clean(0.5 * (matrix + matrix.T))


def second_order_system(M, K, name: str = "x", kind: str = "custom-second-order",
                        half_step_leapfrog: bool = False) -> DiscreteSystem:
    """Wrap bare (M, K) matrices as a second-order system M x'' = -K x."""
    return DiscreteSystem(kind, Structure.SECOND_ORDER, (name,),
                          {"M": as_csr(M), "K": as_csr(K)},
                          half_step_leapfrog=half_step_leapfrog)


def canonical_system(M, K, kind: str = "custom-canonical") -> DiscreteSystem:
    """Wrap bare (M, K) matrices as M v' = -K q, q' = v."""
    return DiscreteSystem(kind, Structure.CANONICAL, ("v", "q"), {"M": as_csr(M), "K": as_csr(K)})


def mixed_system(M1, M2, B, names: Tuple[str, str] = ("v", "sigma"), kind: str = "custom-mixed") -> DiscreteSystem:
    """Wrap bare blocks as M1 x1' = B x2, M2 x2' = -B^T x1."""
    return DiscreteSystem(kind, Structure.MIXED, tuple(names),
                          {"M1": as_csr(M1), "M2": as_csr(M2), "B": as_csr(B)},
                          eliminate=names[1])
