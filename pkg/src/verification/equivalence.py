from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from ..dynamics.formulations import (
    FormulationKind,
    FormulationSpec,
    Profile,
    build_formulation,
    initial_values,
    is_physical_energy,
)
from ..dynamics.integrators import IntegratorConfig, trapezoidal_reconstruct, velocity_view
from ..dynamics.simulation import Trajectory, simulate
from ..dynamics.state import SchemeState
from ..dynamics.system import DiscreteSystem, Structure
from ..fem.assembly import assemble_mass, assemble_stiffness_grad, image_operator
from ..linalg.solvers import SolverConfig
from ..utils.error_utils import InvalidPairError
from ..utils.logging_utils import log

ROLES: Tuple[str, ...] = ("q", "v", "sigma")

# how each role is obtained from a formulation's state
IDENTITY = "identity"
DERIVATIVE_IMAGE = "derivative-image"
RECONSTRUCTION = "trapezoid-reconstruction"
MOMENTUM = "momentum-inverse"

# Maxwell fields play the wave roles: E as velocity, H as stress
MAXWELL_ROLES = {"E": "v", "H": "sigma"}


@dataclass(frozen=True)
class Observation:
    offset: Fraction
    value: np.ndarray


class Observer:
    """
    Maps the states of one run into the common (q, v, sigma) representation.

    States must be fed in step order: the displacement of mixed and
    velocity-only kinds is rebuilt step by step from their velocities,
    starting at the interpolated q0.
    """

    def __init__(self, spec: FormulationSpec, system: DiscreteSystem, cfg: IntegratorConfig,
                 values: Dict[str, np.ndarray]) -> None:
        self.spec = spec
        self.system = system
        self.cfg = cfg
        self.kind = spec.kind
        self.mappings: Dict[str, str] = {}
        self._q = None
        self._last_v = None
        self._image = None
        K = FormulationKind
        if self.kind in (K.MIXED_GRAD_VS, K.MIXED_DIV_VS, K.VELOCITY_ONLY_V):
            self._q = np.asarray(values["q"], dtype=float)
        if self.kind in (K.LAGRANGIAN_Q, K.HAMILTONIAN_VQ, K.HAMILTONIAN_PQ) and "sigma" in system.spaces:
            self._image = spec.material.k_stiff * image_operator(system.spaces["sigma"], system.spaces["q"], "grad")

    def _reconstructed(self, state: SchemeState) -> np.ndarray:
        v = state["v"]
        if state.step != 0:
            if self.cfg.staggered:
                self._q = trapezoidal_reconstruct(self._q, (state["v_prev"],), self.cfg)
            else:
                self._q = trapezoidal_reconstruct(self._q, (self._last_v, v), self.cfg)
        self._last_v = v
        return self._q

    def observe(self, state: SchemeState) -> Dict[str, Observation]:
        K = FormulationKind
        kind = self.kind
        out: Dict[str, Observation] = {}
        if kind == K.HAMILTONIAN_PQ:
            state = velocity_view(self.system, state)
            self.mappings["v"] = MOMENTUM

        if self.system.structure == Structure.SECOND_ORDER:
            x = self.system.fields[0]
            role = MAXWELL_ROLES.get(x, x)
            out[role] = Observation(state.offsets[x], state[x])
            self.mappings.setdefault(role, IDENTITY)
            if kind == K.LAGRANGIAN_Q and "v" in state:
                out["v"] = Observation(state.offsets["v"], state["v"])
                self.mappings["v"] = IDENTITY
        else:
            for name in self.system.fields:
                role = MAXWELL_ROLES.get(name, name)
                out[role] = Observation(state.offsets[name], state[name])
                self.mappings.setdefault(role, IDENTITY)

        if self._q is not None:
            out["q"] = Observation(Fraction(0), self._reconstructed(state))
            self.mappings["q"] = RECONSTRUCTION
        if self._image is not None and "q" in out:
            out["sigma"] = Observation(out["q"].offset, self._image @ out["q"].value)
            self.mappings["sigma"] = DERIVATIVE_IMAGE
        return out

    def role_space(self, role: str):
        for name, r in MAXWELL_ROLES.items():
            if r == role and name in self.system.spaces:
                return self.system.spaces[name]
        return self.system.spaces[role]


@dataclass
class EquivalenceReport:
    """Per-step discrepancies between two formulations run side by side."""

    pair: Tuple[str, str]
    integrator: str
    steps: int
    dt: float
    tol: float
    roles: Tuple[str, ...]
    mappings: Dict[str, Tuple[str, str]]
    reference_energy: float
    rows: List[Dict[str, float]] = field(default_factory=list)

    @property
    def max_discrepancy(self) -> float:
        values = [row[f"disc_{r}"] for row in self.rows for r in self.roles]
        return max(values, default=0.0)

    @property
    def passed(self) -> bool:
        return bool(self.max_discrepancy <= self.tol)

    def to_dict(self) -> dict:
        return {
            "pair": list(self.pair),
            "integrator": self.integrator,
            "N": self.steps,
            "dt": self.dt,
            "tol": self.tol,
            "compared": list(self.roles),
            "mappings": {role: list(m) for role, m in self.mappings.items()},
            "reference_energy": self.reference_energy,
            "max_discrepancy": self.max_discrepancy,
            "pass": self.passed,
        }


@dataclass
class _Side:
    spec: FormulationSpec
    cfg: IntegratorConfig
    system: Optional[DiscreteSystem] = None
    observer: Optional[Observer] = None
    observations: List[Dict[str, Observation]] = field(default_factory=list)
    trajectory: Optional[Trajectory] = None


def _check_pair(spec_a: FormulationSpec, spec_b: FormulationSpec, cfg_a: IntegratorConfig,
                cfg_b: IntegratorConfig) -> None:
    if spec_a.equivalence_class != spec_b.equivalence_class:
        raise InvalidPairError(
            f"{spec_a.kind.value} ({spec_a.equivalence_class}) and {spec_b.kind.value} "
            f"({spec_b.equivalence_class}) have no common representation"
        )
    ma, mb = spec_a.mesh, spec_b.mesh
    if ma is not mb and (ma.shape != mb.shape or ma.extent != mb.extent or ma.dimension != mb.dimension):
        raise InvalidPairError("the two formulations live on different meshes")
    if spec_a.degree != spec_b.degree or spec_a.material != spec_b.material:
        raise InvalidPairError("the two formulations use different degrees or materials")
    if cfg_a.dt != cfg_b.dt or cfg_a.steps != cfg_b.steps:
        raise InvalidPairError("the two runs use different time steps or step counts")


def _run_side(side: _Side, profile: Profile, solver_cfg: Optional[SolverConfig]) -> _Side:
    side.system = build_formulation(side.spec)
    values = initial_values(side.spec, side.system, profile, solver_cfg=solver_cfg)
    side.observer = Observer(side.spec, side.system, side.cfg, values)
    side.trajectory = simulate(
        side.system, values, side.cfg, solver_cfg, keep_states=False,
        on_step=lambda s: side.observations.append(side.observer.observe(s)),
    )
    return side


def _common_roles(obs_a: Dict[str, Observation], obs_b: Dict[str, Observation]) -> Tuple[str, ...]:
    return tuple(r for r in ROLES if r in obs_a and r in obs_b and obs_a[r].offset == obs_b[r].offset)


def check_equivalence(spec_a: FormulationSpec, spec_b: FormulationSpec, cfg: IntegratorConfig, profile: Profile,
                      tol: float = 1e-10, cfg_b: Optional[IntegratorConfig] = None,
                      solver_cfg: Optional[SolverConfig] = None) -> EquivalenceReport:
    """
    Run two formulations with the same time step and compare their trajectories.

    Each step records, per common field, the mass-weighted L2 norm of the
    difference divided by sqrt(2 H0), with H0 the initial physical energy.
    Fields are compared only where both runs place them at the same time level.

    :param cfg: Integrator of the first run (and of the second unless cfg_b is given).
    :raises InvalidPairError: if the formulations share no comparable field.
    """
    cfg_b = cfg_b or cfg
    _check_pair(spec_a, spec_b, cfg, cfg_b)
    sides = [_Side(spec_a, cfg), _Side(spec_b, cfg_b)]
    with ThreadPoolExecutor(max_workers=2) as pool:
        sides = list(pool.map(lambda s: _run_side(s, profile, solver_cfg), sides))
    a, b = sides

    roles = _common_roles(a.observations[0], b.observations[0])
    if not roles:
        raise InvalidPairError(
            f"{spec_a.kind.value} and {spec_b.kind.value} share no field at a common time level"
        )
    if not (a.trajectory.completed and b.trajectory.completed):
        log.warning("[EQUIV] one of the runs stopped early, comparing the common prefix")

    physical = [s for s in sides if is_physical_energy(s.spec.kind)] or sides
    h_ref = physical[0].trajectory.energy.values[0]
    scale = np.sqrt(2.0 * h_ref) if h_ref > 0.0 else 1.0
    masses = {r: assemble_mass(a.observer.role_space(r)) for r in roles}

    integrator = cfg.scheme.value if cfg_b.scheme == cfg.scheme else f"{cfg.scheme.value}/{cfg_b.scheme.value}"
    report = EquivalenceReport(
        pair=(spec_a.kind.value, spec_b.kind.value), integrator=integrator, steps=cfg.steps,
        dt=cfg.dt, tol=tol, roles=roles,
        mappings={r: (a.observer.mappings.get(r, IDENTITY), b.observer.mappings.get(r, IDENTITY)) for r in roles},
        reference_energy=h_ref,
    )
    ea, eb = a.trajectory.energy.values, b.trajectory.energy.values
    for n, (oa, ob) in enumerate(zip(a.observations, b.observations)):
        row = {"step": n, "t": n * cfg.dt}
        for r in ROLES:
            if r in roles:
                d = oa[r].value - ob[r].value
                row[f"disc_{r}"] = float(np.sqrt(max(d @ (masses[r] @ d), 0.0))) / scale
            else:
                row[f"disc_{r}"] = float("nan")
        row["H_A"] = ea[n]
        row["H_B"] = eb[n]
        report.rows.append(row)

    status = "pass" if report.passed else "FAIL"
    log.info(f"[EQUIV] {spec_a.kind.value} vs {spec_b.kind.value} ({integrator}, N={cfg.steps}): "
             f"max discrepancy {report.max_discrepancy:.3e} on {roles}, tol {tol:.1e} -> {status}")
    return report


# --- algebraic identities ---

def second_difference_residual(M, K, levels: Sequence[np.ndarray], dt: float, average: bool = False) -> float:
    """
    max_n ||M (x(n+1) - 2x(n) + x(n-1)) + dt^2 K w(n)||_inf over a sequence of
    levels, with w(n) = x(n) (leapfrog) or (x(n+1) + 2x(n) + x(n-1)) / 4 (average).
    """
    worst = 0.0
    for prev, cur, nxt in zip(levels[:-2], levels[1:-1], levels[2:]):
        w = 0.25 * (nxt + 2.0 * cur + prev) if average else cur
        r = M @ (nxt - 2.0 * cur + prev) + dt * dt * (K @ w)
        worst = max(worst, float(np.max(np.abs(r), initial=0.0)))
    return worst


def pointwise_identity_residual(system: DiscreteSystem, states: Sequence[SchemeState], cfg: IntegratorConfig) -> float:
    """
    Discrete form of c sigma' = grad v for a compatible mixed-grad run:
    max_n ||c (sigma(n+1) - sigma(n)) / dt - R v(n+1/2)||_inf, where R maps
    velocity coefficients to gradient coefficients and v(n+1/2) is the
    half-step velocity (staggered) or the step average (midpoint).
    """
    if system.kind != FormulationKind.MIXED_GRAD_VS.value:
        raise InvalidPairError(f"the pointwise identity concerns mixed-grad runs, got {system.kind}")
    R = image_operator(system.spaces["sigma"], system.spaces["v"], "grad")
    c = system.material.compliance
    worst = 0.0
    for before, after in zip(states[:-1], states[1:]):
        if cfg.staggered:
            v_mid = after["v_prev"]
        else:
            v_mid = 0.5 * (before["v"] + after["v"])
        r = c * (after["sigma"] - before["sigma"]) / cfg.dt - R @ v_mid
        worst = max(worst, float(np.max(np.abs(r), initial=0.0)))
    return worst


def schur_identity_residual(system: DiscreteSystem) -> float:
    """
    max |G^T M_c^{-1} G - K_grad(k)| entrywise for a mixed-grad system, with a
    dense inverse of M_c.
    """
    if system.kind != FormulationKind.MIXED_GRAD_VS.value:
        raise InvalidPairError(f"the reduction identity concerns mixed-grad systems, got {system.kind}")
    G = system.blocks["G"].toarray()
    reduced = G.T @ np.linalg.inv(system.blocks["M2"].toarray()) @ G
    stiffness = assemble_stiffness_grad(system.spaces["v"], system.material.k_stiff).toarray()
    return float(np.max(np.abs(reduced - stiffness)))
