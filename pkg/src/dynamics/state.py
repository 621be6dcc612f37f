from dataclasses import dataclass, field, replace
from enum import Enum
from fractions import Fraction
from typing import Dict, Mapping

import numpy as np

from ..utils.error_utils import InvalidStateError
from ..utils.utils import format_stamp

HALF = Fraction(1, 2)


class Layout(str, Enum):
    """How the vectors of a state are placed in time."""

    COLLOCATED = "collocated"                     # every field at step n
    STAGGERED = "staggered"                       # rates at n +- 1/2
    NEWMARK = "newmark"                           # (x, x', x'') at step n
    LEAPFROG_RECURRENCE = "leapfrog-recurrence"   # two consecutive levels of x
    HAT_RECURRENCE = "hat-recurrence"             # two consecutive levels of x, averaged form


@dataclass(frozen=True, eq=False)
class SchemeState:
    """
    Time-stepping state of one discrete system.

    fields holds named vectors; offsets[name] is the time level of that vector
    relative to the step counter, in units of dt (0 for integer steps, +-1/2
    for staggered rates, -1 for the previous level of a recurrence).
    """

    layout: Layout
    step: int
    dt: float
    fields: Mapping[str, np.ndarray]
    offsets: Mapping[str, Fraction] = field(default_factory=dict)

    def __post_init__(self) -> None:
        offsets = {name: Fraction(self.offsets.get(name, 0)) for name in self.fields}
        object.__setattr__(self, "offsets", offsets)
        object.__setattr__(self, "fields", dict(self.fields))
        if self.layout in (Layout.COLLOCATED, Layout.NEWMARK) and any(offsets.values()):
            raise InvalidStateError(f"{self.layout.value} states keep every field at step n")

    def __getitem__(self, name: str) -> np.ndarray:
        try:
            return self.fields[name]
        except KeyError:
            raise InvalidStateError(f"state has no field '{name}' (fields: {sorted(self.fields)})") from None

    def __contains__(self, name: str) -> bool:
        return name in self.fields

    @property
    def names(self):
        return tuple(self.fields)

    @property
    def staggered(self) -> bool:
        return any(off.denominator != 1 for off in self.offsets.values())

    def level(self, name: str) -> Fraction:
        """Absolute time level of a field in units of dt."""
        return Fraction(self.step) + self.offsets[name]

    def time(self, name: str) -> float:
        return float(self.level(name)) * self.dt

    def stamp(self, name: str) -> str:
        return format_stamp(self.step, self.offsets[name])

    def advance(self, direction: int = 1, **fields: np.ndarray) -> "SchemeState":
        """New state one step further (or back), with the given fields replaced."""
        merged: Dict[str, np.ndarray] = dict(self.fields)
        for name, value in fields.items():
            if name not in merged:
                raise InvalidStateError(f"unknown field '{name}'")
            merged[name] = value
        return replace(self, step=self.step + direction, fields=merged)

    def scaled(self, factor: float) -> "SchemeState":
        return replace(self, fields={k: factor * v for k, v in self.fields.items()})

    def reversed(self, pairs) -> "SchemeState":
        """
        Swap each (name, previous-name) pair so a backward integrator sees the
        level ahead of it in its own direction.
        """
        fields = dict(self.fields)
        offsets = dict(self.offsets)
        for name, prev in pairs:
            fields[name], fields[prev] = fields[prev], fields[name]
            offsets[name], offsets[prev] = offsets[prev], offsets[name]
        return replace(self, fields=fields, offsets=offsets)

    def require(self, name: str, offset: Fraction) -> None:
        """Raise InvalidStateError unless field name sits at the given offset."""
        if name not in self.fields:
            raise InvalidStateError(f"state has no field '{name}'")
        if self.offsets[name] != offset:
            raise InvalidStateError(
                f"field '{name}' is at offset {self.offsets[name]}, the scheme expects {offset}"
            )

    def max_difference(self, other: "SchemeState") -> float:
        if set(self.fields) != set(other.fields):
            raise InvalidStateError("states carry different fields")
        return max(float(np.max(np.abs(self[k] - other[k]), initial=0.0)) for k in self.fields)
