from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np

from .integrators import IntegratorConfig, make_kernel, rate_names, velocity_view
from .state import Layout, SchemeState
from .system import DiscreteSystem, Structure
from ..fem.assembly import (
    MaterialParams,
    assemble_coupling_div,
    assemble_coupling_grad,
    assemble_load,
    assemble_mass,
    assemble_stiffness_div,
    assemble_stiffness_grad,
    image_operator,
    interpolate,
    rotate_vector_rows,
)
from ..fem.mesh import Mesh
from ..fem.spaces import (
    BoundaryCondition,
    Compatibility,
    Family,
    FunctionSpace,
    derivative_space,
    make_space,
)
from ..linalg.solvers import LinearSolver, SolverConfig
from ..utils.error_utils import (
    CompatibilityViolationError,
    InvalidArgumentError,
    InvalidStateError,
    UnsupportedSpaceError,
)
from ..utils.logging_utils import log
from ..utils.utils import relative_drift


class FormulationKind(str, Enum):
    LAGRANGIAN_Q = "lagrangian-q"
    HAMILTONIAN_VQ = "hamiltonian-vq"
    HAMILTONIAN_PQ = "hamiltonian-pq"
    MIXED_GRAD_VS = "mixed-grad-vs"
    MIXED_DIV_VS = "mixed-div-vs"
    THREE_FIELD_VQS = "three-field-vqs"
    VELOCITY_ONLY_V = "velocity-only-v"
    STRESS_ONLY_S = "stress-only-s"
    MAXWELL_TM_EH = "maxwell-tm-eh"
    MAXWELL_TM_E = "maxwell-tm-e"


# long names accepted in configs next to the stable ids
ALIASES: Dict[str, FormulationKind] = {
    "lagrangian-2nd-order": FormulationKind.LAGRANGIAN_Q,
    "mixed-grad-vσ": FormulationKind.MIXED_GRAD_VS,
    "mixed-div-vσ": FormulationKind.MIXED_DIV_VS,
    "three-field-vqσ": FormulationKind.THREE_FIELD_VQS,
    "velocity-only-2nd": FormulationKind.VELOCITY_ONLY_V,
    "stress-only-2nd": FormulationKind.STRESS_ONLY_S,
    "maxwell-TM-adapter": FormulationKind.MAXWELL_TM_EH,
}

GRAD_CLASS = "grad"
DIV_CLASS = "div"
MAXWELL_CLASS = "maxwell"

# formulations whose trajectories are comparable field by field
EQUIVALENCE_CLASS: Dict[FormulationKind, str] = {
    FormulationKind.LAGRANGIAN_Q: GRAD_CLASS,
    FormulationKind.HAMILTONIAN_VQ: GRAD_CLASS,
    FormulationKind.HAMILTONIAN_PQ: GRAD_CLASS,
    FormulationKind.MIXED_GRAD_VS: GRAD_CLASS,
    FormulationKind.VELOCITY_ONLY_V: GRAD_CLASS,
    FormulationKind.MIXED_DIV_VS: DIV_CLASS,
    FormulationKind.STRESS_ONLY_S: DIV_CLASS,
    FormulationKind.THREE_FIELD_VQS: DIV_CLASS,
    FormulationKind.MAXWELL_TM_EH: MAXWELL_CLASS,
    FormulationKind.MAXWELL_TM_E: MAXWELL_CLASS,
}

ADMISSIBLE_DIMENSIONS: Dict[FormulationKind, Tuple[int, ...]] = {
    FormulationKind.LAGRANGIAN_Q: (1, 2),
    FormulationKind.HAMILTONIAN_VQ: (1, 2),
    FormulationKind.HAMILTONIAN_PQ: (1, 2),
    FormulationKind.MIXED_GRAD_VS: (1,),
    FormulationKind.VELOCITY_ONLY_V: (1, 2),
    FormulationKind.MIXED_DIV_VS: (1, 2),
    FormulationKind.STRESS_ONLY_S: (1, 2),
    FormulationKind.THREE_FIELD_VQS: (1, 2),
    FormulationKind.MAXWELL_TM_EH: (2,),
    FormulationKind.MAXWELL_TM_E: (2,),
}

# energy of these second-order reductions is not the physical Hamiltonian
NON_PHYSICAL_ENERGY = (
    FormulationKind.VELOCITY_ONLY_V,
    FormulationKind.STRESS_ONLY_S,
    FormulationKind.MAXWELL_TM_E,
)


def parse_kind(name) -> FormulationKind:
    """Formulation kind from its id or one of its long names."""
    if isinstance(name, FormulationKind):
        return name
    if name in ALIASES:
        return ALIASES[name]
    try:
        return FormulationKind(name)
    except ValueError:
        known = ", ".join(k.value for k in FormulationKind)
        raise InvalidArgumentError(f"unknown formulation '{name}' (known: {known})") from None


def check_admissible(kind, dimension: int) -> FormulationKind:
    """
    Check that a formulation can be built on a mesh of the given dimension.

    :raises CompatibilityViolationError: for mixed-grad in 2D, where the gradient
        of continuous P1 has no representable exact image.
    :raises InvalidArgumentError: for Maxwell kinds off 2D.
    """
    kind = parse_kind(kind)
    if dimension in ADMISSIBLE_DIMENSIONS[kind]:
        return kind
    if kind == FormulationKind.MIXED_GRAD_VS:
        raise CompatibilityViolationError(
            f"{kind.value} needs the exact gradient image of its velocity space, available in 1D only"
        )
    raise InvalidArgumentError(f"{kind.value} is defined for dimension {ADMISSIBLE_DIMENSIONS[kind]}, got {dimension}")


@dataclass(frozen=True, eq=False)
class FormulationSpec:
    """
    One formulation on one mesh.

    :param kind: Formulation id.
    :param mesh: Interval or rectangle mesh.
    :param degree: Polynomial degree k of the continuous Lagrange space
        (1D: 1..4, 2D: 1).
    :param material: Constant coefficients.
    """

    kind: FormulationKind
    mesh: Mesh
    degree: int = 1
    material: MaterialParams = field(default_factory=MaterialParams)

    def __post_init__(self) -> None:
        object.__setattr__(self, "kind", check_admissible(self.kind, self.mesh.dimension))
        if self.mesh.dimension == 2 and self.degree != 1:
            raise UnsupportedSpaceError(f"2D formulations use degree 1, got {self.degree}")
        if not 1 <= self.degree <= 4:
            raise UnsupportedSpaceError(f"degree must lie in 1..4, got {self.degree}")

    @property
    def dimension(self) -> int:
        return self.mesh.dimension

    @property
    def equivalence_class(self) -> str:
        return EQUIVALENCE_CLASS[self.kind]

    @property
    def is_maxwell(self) -> bool:
        return self.equivalence_class == MAXWELL_CLASS

    @property
    def wave_speed(self) -> float:
        return self.material.light_speed if self.is_maxwell else self.material.wave_speed


# --- analytic profiles ---

class ProfileKind(str, Enum):
    STANDING = "standing-mode"
    VELOCITY = "velocity-mode"
    ZERO = "zero"


@dataclass(frozen=True)
class Profile:
    """
    Analytic initial data and the exact standing-wave solution it generates.

    standing-mode: q = A S(x) cos(w t); velocity-mode: q = A S(x) sin(w t) / w,
    with S(x) = sin(m pi x^) (1D) or sin(m pi x^) sin(m pi y^) (2D) in
    coordinates x^ rescaled to [0, 1].
    """

    kind: ProfileKind = ProfileKind.STANDING
    mode: int = 1
    amplitude: float = 1.0

    def __post_init__(self) -> None:
        try:
            object.__setattr__(self, "kind", ProfileKind(self.kind))
        except ValueError as e:
            raise InvalidArgumentError(str(e)) from e
        if isinstance(self.mode, bool) or not isinstance(self.mode, int) or self.mode < 1:
            raise InvalidArgumentError(f"mode number must be a positive integer, got {self.mode!r}")
        if not np.isfinite(self.amplitude):
            raise InvalidArgumentError(f"amplitude must be finite, got {self.amplitude!r}")

    def omega(self, mesh: Mesh, speed: float) -> float:
        lengths = np.array([hi - lo for lo, hi in mesh.extent])
        return float(self.mode * np.pi * np.sqrt(np.sum(1.0 / lengths ** 2)) * speed)

    def shape(self, mesh: Mesh) -> Callable[[np.ndarray], np.ndarray]:
        m = self.mode
        lo = np.array([e[0] for e in mesh.extent])
        length = np.array([e[1] - e[0] for e in mesh.extent])

        def s(points: np.ndarray) -> np.ndarray:
            xhat = (np.atleast_2d(points) - lo) / length
            return np.prod(np.sin(m * np.pi * xhat), axis=1)

        return s

    def shape_gradient(self, mesh: Mesh) -> Callable[[np.ndarray], np.ndarray]:
        m = self.mode
        lo = np.array([e[0] for e in mesh.extent])
        length = np.array([e[1] - e[0] for e in mesh.extent])

        def grad(points: np.ndarray) -> np.ndarray:
            xhat = (np.atleast_2d(points) - lo) / length
            sines = np.sin(m * np.pi * xhat)
            cosines = np.cos(m * np.pi * xhat)
            out = np.empty_like(xhat)
            for d in range(xhat.shape[1]):
                others = np.prod(np.delete(sines, d, axis=1), axis=1)
                out[:, d] = m * np.pi / length[d] * cosines[:, d] * others
            return out

        return grad

    def time_factors(self, omega: float, t: float) -> Tuple[float, float]:
        """(f(t), f'(t)) with q = A S(x) f(t)."""
        if self.kind == ProfileKind.STANDING:
            return np.cos(omega * t), -omega * np.sin(omega * t)
        if self.kind == ProfileKind.VELOCITY:
            return np.sin(omega * t) / omega, np.cos(omega * t)
        return 0.0, 0.0

    def exact(self, spec: FormulationSpec, name: str, t: float) -> Callable[[np.ndarray], np.ndarray]:
        """
        Exact field of the continuous model at time t.

        Supported names: q and E (displacement), v (velocity),
        sigma (k grad q, scalar in 1D).
        """
        mesh = spec.mesh
        omega = self.omega(mesh, spec.wave_speed)
        f, df = self.time_factors(omega, t)
        a = self.amplitude
        if name in ("q", "E"):
            s = self.shape(mesh)
            return lambda x: a * f * s(x)
        if name == "v":
            s = self.shape(mesh)
            return lambda x: a * df * s(x)
        if name == "sigma":
            grad = self.shape_gradient(mesh)
            k = spec.material.k_stiff
            if mesh.dimension == 1:
                return lambda x: k * a * f * grad(x)[:, 0]
            return lambda x: k * a * f * grad(x)
        raise InvalidArgumentError(f"no exact solution for field '{name}'")


# --- assembly of the catalog ---

def _grad_spaces(spec: FormulationSpec) -> Tuple[FunctionSpace, FunctionSpace]:
    v_space = make_space(spec.mesh, Family.CG, spec.degree, BoundaryCondition.DIRICHLET)
    w_space = derivative_space(v_space) if spec.dimension == 1 else None
    return v_space, w_space


def _div_spaces(spec: FormulationSpec) -> Tuple[FunctionSpace, FunctionSpace]:
    if spec.dimension == 1:
        s_space = make_space(spec.mesh, Family.CG, spec.degree)
    else:
        s_space = make_space(spec.mesh, Family.RT, 0, value_shape="vector")
    return derivative_space(s_space), s_space


def maxwell_tm_adapter(spec: FormulationSpec) -> DiscreteSystem:
    """
    Transverse-mode Maxwell system eps E' = curl H, mu H' = -curl E.

    E_z lives in continuous P1 with E = 0 on the boundary and H in vector DG0.
    The curl coupling is the gradient coupling with its rows rotated, so the
    system has the mixed-grad block shape with (eps, mu) in place of (rho, c).
    """
    if spec.dimension != 2:
        raise InvalidArgumentError(f"the transverse-mode adapter needs a 2D mesh, got {spec.dimension}D")
    e_space = make_space(spec.mesh, Family.CG, 1, BoundaryCondition.DIRICHLET)
    h_space = make_space(spec.mesh, Family.DG, 0, value_shape="vector")
    gradient = assemble_coupling_grad(h_space, e_space, Compatibility.INCLUSION)
    curl = rotate_vector_rows(gradient, h_space)
    mat = spec.material
    m_eps = assemble_mass(e_space, mat.epsilon)
    m_mu = assemble_mass(h_space, mat.mu)
    system = DiscreteSystem(
        FormulationKind.MAXWELL_TM_EH.value, Structure.MIXED, ("E", "H"),
        {"M1": m_eps, "M2": m_mu, "B": curl.T.tocsr(), "C": curl},
        spaces={"E": e_space, "H": h_space}, material=mat, eliminate="H",
    )
    if spec.kind == FormulationKind.MAXWELL_TM_EH:
        return system
    stiffness = curl.T @ system.inverse_mass("H") @ curl
    return DiscreteSystem(
        spec.kind.value, Structure.SECOND_ORDER, ("E",),
        {"M": m_eps, "K": 0.5 * (stiffness + stiffness.T), "C": curl, "M_mu": m_mu},
        spaces={"E": e_space, "H": h_space}, material=mat, half_step_leapfrog=True,
    )


def build_formulation(spec: FormulationSpec) -> DiscreteSystem:
    """
    Assemble the blocks of a formulation.

    :param spec: Formulation, mesh, degree and material.
    :return: Immutable DiscreteSystem; mixed kinds also carry their coupling
        matrix under "G" (gradient) or "D" (divergence).
    :raises CompatibilityViolationError: if the coupled spaces are not compatible.
    :raises UnsupportedSpaceError: if a required space cannot be built.
    """
    kind = spec.kind
    mat = spec.material
    K = FormulationKind
    if spec.is_maxwell:
        system = maxwell_tm_adapter(spec)
    elif kind in (K.LAGRANGIAN_Q, K.HAMILTONIAN_VQ, K.HAMILTONIAN_PQ, K.VELOCITY_ONLY_V):
        v_space, w_space = _grad_spaces(spec)
        blocks = {"M": assemble_mass(v_space, mat.rho), "K": assemble_stiffness_grad(v_space, mat.k_stiff)}
        spaces = {"q": v_space, "v": v_space}
        if w_space is not None:
            spaces["sigma"] = w_space
        if kind == K.LAGRANGIAN_Q:
            system = DiscreteSystem(kind.value, Structure.SECOND_ORDER, ("q",), blocks, spaces, mat)
        elif kind == K.VELOCITY_ONLY_V:
            system = DiscreteSystem(kind.value, Structure.SECOND_ORDER, ("v",), blocks, spaces, mat,
                                    half_step_leapfrog=True)
        else:
            system = DiscreteSystem(kind.value, Structure.CANONICAL, ("v", "q"), blocks, spaces, mat,
                                    momentum=kind == K.HAMILTONIAN_PQ)
    elif kind == K.MIXED_GRAD_VS:
        v_space, w_space = _grad_spaces(spec)
        G = assemble_coupling_grad(w_space, v_space)
        system = DiscreteSystem(
            kind.value, Structure.MIXED, ("v", "sigma"),
            {"M1": assemble_mass(v_space, mat.rho), "M2": assemble_mass(w_space, mat.compliance),
             "B": -G.T.tocsr(), "G": G},
            {"v": v_space, "sigma": w_space, "q": v_space}, mat, eliminate="sigma",
        )
    else:
        q_space, s_space = _div_spaces(spec)
        D = assemble_coupling_div(q_space, s_space)
        m_rho = assemble_mass(q_space, mat.rho)
        m_c = assemble_mass(s_space, mat.compliance)
        spaces = {"v": q_space, "q": q_space, "sigma": s_space}
        if kind == K.MIXED_DIV_VS:
            system = DiscreteSystem(kind.value, Structure.MIXED, ("v", "sigma"),
                                    {"M1": m_rho, "M2": m_c, "B": D, "D": D}, spaces, mat, eliminate="v")
        elif kind == K.THREE_FIELD_VQS:
            system = DiscreteSystem(kind.value, Structure.THREE_FIELD, ("v", "q", "sigma"),
                                    {"Mv": m_rho, "Ms": m_c, "D": D}, spaces, mat)
        else:
            stiffness = assemble_stiffness_div(s_space, mat.specific_volume)
            system = DiscreteSystem(kind.value, Structure.SECOND_ORDER, ("sigma",),
                                    {"M": m_c, "K": stiffness, "D": D, "M_rho": m_rho}, spaces, mat)
    sizes = ", ".join(f"{name}={system.spaces[name].dof_count}" for name in system.fields)
    log.info(f"[FORMULATION] {kind.value} on {spec.dimension}D mesh, k={spec.degree}: {sizes}")
    return system


# --- initial data ---

def _project(space: FunctionSpace, f: Callable[[np.ndarray], np.ndarray], projection: str,
             solver_cfg: Optional[SolverConfig]) -> np.ndarray:
    if projection == "interpolate":
        return interpolate(space, f)
    if projection == "l2":
        return LinearSolver(assemble_mass(space), solver_cfg, label="projection")(assemble_load(space, f))
    raise InvalidArgumentError(f"projection must be 'interpolate' or 'l2', got '{projection}'")


def initial_values(spec: FormulationSpec, system: DiscreteSystem, profile: Profile,
                   projection: str = "interpolate", solver_cfg: Optional[SolverConfig] = None) -> Dict[str, np.ndarray]:
    """
    Collocated values at t = 0 for every evolved field (and their rates for
    second-order kinds).

    Stresses are never interpolated independently: mixed-grad uses the exact
    image k R q0, div kinds solve the constraint M_c sigma0 = -D^T q0. Mixed
    kinds also return q0, the seed of the reconstructed displacement.
    """
    kind = spec.kind
    K = FormulationKind
    q_fun = profile.exact(spec, "q", 0.0)
    v_fun = profile.exact(spec, "v", 0.0)
    b = system.blocks
    solve = lambda matrix, rhs: LinearSolver(matrix, solver_cfg, label="initial")(rhs)  # noqa: E731

    if spec.is_maxwell:
        e0 = _project(system.spaces["E"], q_fun, projection, solver_cfg)
        h0 = np.zeros(system.spaces["H"].dof_count)
        if kind == K.MAXWELL_TM_EH:
            return {"E": e0, "H": h0}
        return {"E": e0, "E_dot": np.zeros_like(e0), "H": h0}

    if spec.equivalence_class == GRAD_CLASS:
        space = system.spaces["q"]
        q0 = _project(space, q_fun, projection, solver_cfg)
        v0 = _project(space, v_fun, projection, solver_cfg)
        values = {"q": q0, "v": v0}
        if kind == K.HAMILTONIAN_PQ:
            values["p"] = b["M"] @ v0
        elif kind == K.MIXED_GRAD_VS:
            R = image_operator(system.spaces["sigma"], space, "grad")
            values["sigma"] = spec.material.k_stiff * (R @ q0)
        elif kind == K.VELOCITY_ONLY_V:
            values["v_dot"] = solve(b["M"], -(b["K"] @ q0))
        return values

    q_space, s_space = system.spaces["q"], system.spaces["sigma"]
    q0 = _project(q_space, q_fun, projection, solver_cfg)
    v0 = _project(q_space, v_fun, projection, solver_cfg)
    m_c = b["M"] if kind == K.STRESS_ONLY_S else b.get("M2", b.get("Ms"))
    D = b["D"]
    sigma0 = solve(m_c, -(D.T @ q0))
    values = {"v": v0, "q": q0, "sigma": sigma0}
    if kind == K.STRESS_ONLY_S:
        values["sigma_dot"] = solve(m_c, -(D.T @ v0))
    return values


def initial_conditions(spec: FormulationSpec, profile: Profile, cfg: IntegratorConfig,
                       system: Optional[DiscreteSystem] = None, projection: str = "interpolate",
                       solver_cfg: Optional[SolverConfig] = None) -> SchemeState:
    """
    Scheme state at step 0 for a formulation, profile and integrator.

    Staggered schemes get their half-step rates from the kick-start
    v(+-1/2) = v0 +- dt/2 a0.
    """
    system = system or build_formulation(spec)
    values = initial_values(spec, system, profile, projection, solver_cfg)
    return make_kernel(system, cfg, solver_cfg).start(values)


# --- energies ---

def _quad(matrix, x, y=None) -> float:
    return 0.5 * float(x @ (matrix @ (x if y is None else y)))


def _rate_pair(system: DiscreteSystem) -> Tuple[str, Optional[str]]:
    s = system.structure
    if s == Structure.MIXED:
        return system.fields[0], system.fields[1]
    if s == Structure.CANONICAL:
        return "v", None
    return "v", "sigma"


def _energy(system: DiscreteSystem, state: SchemeState, cfg: Optional[IntegratorConfig], synchronized: bool) -> float:
    state = velocity_view(system, state)
    b = system.blocks
    layout = state.layout

    if layout == Layout.NEWMARK:
        x = system.fields[0]
        xd, xdd = rate_names(x)
        energy = _quad(b["M"], state[xd]) + _quad(b["K"], state[x])
        if cfg is not None and not synchronized:
            energy += (cfg.beta - 0.25) * cfg.dt ** 2 * _quad(b["M"], state[xdd])
        return energy

    if layout in (Layout.LEAPFROG_RECURRENCE, Layout.HAT_RECURRENCE):
        x = system.fields[0]
        cur, prev = state[x], state[f"{x}_prev"]
        d = (cur - prev) / state.dt
        kinetic = _quad(b["M"], d)
        if layout == Layout.HAT_RECURRENCE:
            mid = 0.5 * (cur + prev)
            return kinetic + _quad(b["K"], mid)
        if synchronized:
            return kinetic + _quad(b["K"], cur)
        return kinetic + _quad(b["K"], cur, prev)

    if system.structure == Structure.SECOND_ORDER:
        raise InvalidStateError(f"{system.kind} is stepped as a recurrence, got a {layout.value} state")

    rate, other = _rate_pair(system)
    m_rate = system.mass_of(rate)
    if layout == Layout.STAGGERED:
        ahead, behind = state[rate], state[f"{rate}_prev"]
        if synchronized:
            mean = 0.5 * (ahead + behind)
            kinetic = _quad(m_rate, mean)
        else:
            kinetic = _quad(m_rate, behind, ahead)
    elif layout == Layout.COLLOCATED:
        kinetic = _quad(m_rate, state[rate])
    else:
        raise InvalidStateError(f"{system.kind} has no energy for a {layout.value} state")
    if system.structure == Structure.CANONICAL:
        return kinetic + _quad(b["K"], state["q"])
    return kinetic + _quad(system.mass_of(other), state[other])


def energy(system: DiscreteSystem, state: SchemeState, cfg: Optional[IntegratorConfig] = None) -> float:
    """
    Discrete energy conserved by the scheme that produced the state.

    collocated:  1/2 x1.M1.x1 + 1/2 x2.M2.x2  (1/2 v.M.v + 1/2 q.K.q for (v, q))
    staggered:   1/2 v(n-1/2).M.v(n+1/2) + potential at step n
    Newmark:     1/2 v.M.v + 1/2 q.K.q + 1/2 (beta - 1/4) dt^2 a.M.a
    recurrences: 1/2 d.M.d + 1/2 x(n+1).K.x(n)      (leapfrog)
                 1/2 d.M.d + 1/2 m.K.m              (midpoint, m the level average)
                 with d = (x(n+1) - x(n)) / dt

    :raises InvalidStateError: if the state layout does not fit the system.
    """
    return _energy(system, state, cfg, synchronized=False)


def instantaneous_energy(system: DiscreteSystem, state: SchemeState, cfg: Optional[IntegratorConfig] = None) -> float:
    """
    Energy evaluated at one time level: staggered rates are synchronized as
    v(n) = (v(n-1/2) + v(n+1/2)) / 2, recurrences use x(n+1) on both sides of K.
    """
    return _energy(system, state, cfg, synchronized=True)


def is_physical_energy(kind) -> bool:
    return parse_kind(kind) not in NON_PHYSICAL_ENERGY


@dataclass
class EnergyTrace:
    """Per-step energies of one run."""

    form: str
    steps: List[int] = field(default_factory=list)
    times: List[float] = field(default_factory=list)
    values: List[float] = field(default_factory=list)
    instantaneous: List[float] = field(default_factory=list)

    def append(self, step: int, time: float, value: float, inst: float) -> None:
        self.steps.append(step)
        self.times.append(time)
        self.values.append(value)
        self.instantaneous.append(inst)

    def __len__(self) -> int:
        return len(self.steps)

    @property
    def initial(self) -> float:
        return self.values[0] if self.values else 0.0

    def relative_drift(self) -> float:
        """max |H(n) - H(0)| / H(0); 0 for a zero trace."""
        return relative_drift(self.values)

    def oscillation(self) -> float:
        """max |H_inst(n) - H(n)|, the deviation of the instantaneous energy."""
        if not self.values:
            return 0.0
        return float(np.max(np.abs(np.asarray(self.instantaneous) - np.asarray(self.values))))

    def rows(self):
        for row in zip(self.steps, self.times, self.values, self.instantaneous):
            yield row

