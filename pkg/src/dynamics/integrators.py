from dataclasses import dataclass, replace
from enum import Enum
from fractions import Fraction
from math import isfinite
from numbers import Integral
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np
from scipy.sparse import bmat, identity

from .state import HALF, Layout, SchemeState
from .system import DiscreteSystem, Structure, second_order_system
from ..linalg.solvers import LinearSolver, SolverConfig, SolverStats
from ..utils.error_utils import InvalidArgumentError, InvalidStateError
from ..utils.logging_utils import log


class Scheme(str, Enum):
    NEWMARK = "newmark"
    LEAPFROG = "leapfrog"
    STORMER_VERLET = "stormer-verlet"
    MIDPOINT = "implicit-midpoint"


class Reconstruction(str, Enum):
    NONE = "none"
    TRAPEZOIDAL = "trapezoidal"
    HALF_STEP = "half-step"


class MidpointPath(str, Enum):
    SCHUR = "schur"
    MONOLITHIC = "monolithic"


# (gamma, beta) each named scheme is equivalent to
SCHEME_PARAMETERS: Dict[Scheme, Tuple[float, float]] = {
    Scheme.LEAPFROG: (0.5, 0.0),
    Scheme.STORMER_VERLET: (0.5, 0.0),
    Scheme.MIDPOINT: (0.5, 0.25),
}


@dataclass(frozen=True)
class IntegratorConfig:
    """
    Time integration settings.

    :param scheme: Newmark, leapfrog / Stormer-Verlet or implicit midpoint.
    :param dt: Time step, > 0.
    :param steps: Number of steps N.
    :param gamma: Newmark gamma; fixed to 1/2 by the named schemes.
    :param beta: Newmark beta; 0 for leapfrog, 1/4 for midpoint.
    :param reconstruction: How the primal variable is recovered from velocities.
    :param midpoint_path: Schur-complement or monolithic implicit solve.
    :param backward: Step with -dt.
    """

    scheme: Scheme
    dt: float
    steps: int = 0
    gamma: Optional[float] = None
    beta: Optional[float] = None
    reconstruction: Optional[Reconstruction] = None
    midpoint_path: MidpointPath = MidpointPath.SCHUR
    backward: bool = False

    def __post_init__(self) -> None:
        try:
            scheme = Scheme(self.scheme)
            path = MidpointPath(self.midpoint_path)
        except ValueError as e:
            raise InvalidArgumentError(str(e)) from e
        set_ = lambda name, value: object.__setattr__(self, name, value)  # noqa: E731
        set_("scheme", scheme)
        set_("midpoint_path", path)

        if not (isinstance(self.dt, (int, float)) and isfinite(self.dt) and self.dt > 0.0):
            raise InvalidArgumentError(f"dt must be positive and finite, got {self.dt!r}")
        if isinstance(self.steps, bool) or not isinstance(self.steps, Integral) or self.steps < 0:
            raise InvalidArgumentError(f"steps must be a non-negative integer, got {self.steps!r}")

        if scheme in SCHEME_PARAMETERS:
            gamma, beta = SCHEME_PARAMETERS[scheme]
            if (self.gamma is not None and self.gamma != gamma) or (self.beta is not None and self.beta != beta):
                raise InvalidArgumentError(
                    f"{scheme.value} is Newmark with (gamma, beta) = ({gamma}, {beta}), "
                    f"got ({self.gamma}, {self.beta})"
                )
        else:
            gamma = 0.5 if self.gamma is None else float(self.gamma)
            beta = 0.25 if self.beta is None else float(self.beta)
            if beta < 0.0 or gamma < 0.0:
                raise InvalidArgumentError(f"Newmark parameters must be non-negative, got ({gamma}, {beta})")
        set_("gamma", gamma)
        set_("beta", beta)

        if self.reconstruction is None:
            mode = Reconstruction.HALF_STEP if self.staggered else Reconstruction.TRAPEZOIDAL
        else:
            mode = Reconstruction(self.reconstruction)
        set_("reconstruction", mode)

    @property
    def staggered(self) -> bool:
        return self.scheme in (Scheme.LEAPFROG, Scheme.STORMER_VERLET)

    @property
    def explicit(self) -> bool:
        return self.staggered or (self.scheme == Scheme.NEWMARK and self.beta == 0.0)

    @property
    def direction(self) -> int:
        return -1 if self.backward else 1

    @property
    def step_size(self) -> float:
        return self.direction * self.dt

    @property
    def final_time(self) -> float:
        return self.steps * self.dt

    def reversed(self) -> "IntegratorConfig":
        return replace(self, backward=not self.backward)


def rate_names(name: str) -> Tuple[str, str]:
    """Names of the first and second time derivative of a second-order field."""
    if name == "q":
        return "v", "a"
    return f"{name}_dot", f"{name}_ddot"


class Kernel:
    """
    Stepping kernel for one (system, integrator) pair.

    Matrices are factorized once at construction; start() turns collocated
    initial values into the scheme's state and step() advances it.
    """

    layout: Layout = Layout.COLLOCATED

    def __init__(self, system: DiscreteSystem, cfg: IntegratorConfig,
                 solver_cfg: Optional[SolverConfig] = None, stats: Optional[SolverStats] = None) -> None:
        self.system = system
        self.cfg = cfg
        self.solver_cfg = solver_cfg or SolverConfig()
        self.stats = stats
        self.h = cfg.step_size
        self.direction = cfg.direction
        self.pairs: Tuple[Tuple[str, str], ...] = ()

    def _solver(self, matrix, label: str, symmetric: bool = True) -> LinearSolver:
        return LinearSolver(matrix, self.solver_cfg, symmetric=symmetric, stats=self.stats,
                            label=f"{self.system.kind}:{label}")

    def _state(self, fields: Mapping[str, np.ndarray], offsets: Mapping[str, Fraction]) -> SchemeState:
        return SchemeState(self.layout, 0, self.cfg.dt, dict(fields), dict(offsets))

    def _check(self, state: SchemeState) -> None:
        if state.layout != self.layout:
            raise InvalidStateError(
                f"{type(self).__name__} expects a {self.layout.value} state, got {state.layout.value}"
            )

    def start(self, values: Mapping[str, np.ndarray]) -> SchemeState:
        raise NotImplementedError

    def step(self, state: SchemeState) -> SchemeState:
        raise NotImplementedError

    def reverse(self, state: SchemeState) -> SchemeState:
        """Re-label a state so that it can be stepped in the opposite direction."""
        return state.reversed(self.pairs)


def _value(values: Mapping[str, np.ndarray], name: str) -> np.ndarray:
    if name not in values:
        raise InvalidStateError(f"initial values lack '{name}' (have {sorted(values)})")
    return np.asarray(values[name], dtype=float)


class NewmarkKernel(Kernel):
    """Newmark family on M x'' = -K x with state (x, x', x'')."""

    layout = Layout.NEWMARK

    def __init__(self, system, cfg, solver_cfg=None, stats=None) -> None:
        super().__init__(system, cfg, solver_cfg, stats)
        if system.structure != Structure.SECOND_ORDER:
            raise InvalidArgumentError(f"Newmark needs a second-order system, {system.kind} is {system.structure.value}")
        self.M, self.K = system.blocks["M"], system.blocks["K"]
        self.x = system.fields[0]
        self.xd, self.xdd = rate_names(self.x)
        self.mass = self._solver(self.M, "M")
        h, beta = self.h, cfg.beta
        self.effective = self.mass if beta == 0.0 else self._solver(self.M + beta * h * h * self.K, "M+bK")

    def start(self, values) -> SchemeState:
        x0 = _value(values, self.x)
        xd0 = _value(values, self.xd)
        a0 = self.mass(-(self.K @ x0))
        return self._state({self.x: x0, self.xd: xd0, self.xdd: a0}, {})

    def step(self, state: SchemeState) -> SchemeState:
        self._check(state)
        h, gamma, beta = self.h, self.cfg.gamma, self.cfg.beta
        x, v, a = state[self.x], state[self.xd], state[self.xdd]
        predictor = x + h * v + h * h * (0.5 - beta) * a
        a_new = self.effective(-(self.K @ predictor))
        x_new = predictor + h * h * beta * a_new
        v_new = v + h * ((1.0 - gamma) * a + gamma * a_new)
        return state.advance(self.direction, **{self.x: x_new, self.xd: v_new, self.xdd: a_new})


class RecurrenceKernel(Kernel):
    """
    Three-term recurrences on M x'' = -K x.

    Leapfrog:  M (x+ - 2x + x-) = -dt^2 K x
    Midpoint:  M (x+ - 2x + x-) = -dt^2 K (x+ + 2x + x-) / 4
    """

    def __init__(self, system, cfg, solver_cfg=None, stats=None) -> None:
        super().__init__(system, cfg, solver_cfg, stats)
        if system.structure != Structure.SECOND_ORDER:
            raise InvalidArgumentError(f"{system.kind} is not a second-order system")
        self.M, self.K = system.blocks["M"], system.blocks["K"]
        self.x = system.fields[0]
        self.prev = f"{self.x}_prev"
        self.xd = rate_names(self.x)[0]
        self.pairs = ((self.x, self.prev),)
        self.hat = cfg.scheme == Scheme.MIDPOINT
        self.layout = Layout.HAT_RECURRENCE if self.hat else Layout.LEAPFROG_RECURRENCE
        self.half_step = system.half_step_leapfrog and not self.hat
        self.mass = self._solver(self.M, "M")
        h = self.h
        if self.hat:
            self.A = self.M + 0.25 * h * h * self.K
            self.lhs = self._solver(self.A, "M+K/4")

    def offsets(self) -> Dict[str, Fraction]:
        d = self.direction
        if self.half_step:
            return {self.x: d * HALF, self.prev: -d * HALF}
        return {self.x: Fraction(0), self.prev: Fraction(-d)}

    def start(self, values) -> SchemeState:
        x0 = _value(values, self.x)
        xd0 = _value(values, self.xd)
        h = self.h
        if self.hat:
            # one midpoint step backwards on the pair (x, x')
            s = -h
            y_new = self.lhs((self.M - 0.25 * s * s * self.K) @ xd0 - s * (self.K @ x0))
            prev = x0 + 0.5 * s * (xd0 + y_new)
            return self._state({self.x: x0, self.prev: prev}, self.offsets())
        if self.half_step:
            return self._state({self.x: x0 + 0.5 * h * xd0, self.prev: x0 - 0.5 * h * xd0}, self.offsets())
        a0 = self.mass(-(self.K @ x0))
        prev = x0 - h * xd0 + 0.5 * h * h * a0
        return self._state({self.x: x0, self.prev: prev}, self.offsets())

    def step(self, state: SchemeState) -> SchemeState:
        self._check(state)
        state.require(self.x, self.offsets()[self.x])
        x, prev = state[self.x], state[self.prev]
        h = self.h
        if self.hat:
            rhs = 2.0 * (self.M @ x) - 0.5 * h * h * (self.K @ x) - self.A @ prev
            x_new = self.lhs(rhs)
        else:
            x_new = 2.0 * x - prev + self.mass(-h * h * (self.K @ x))
        return state.advance(self.direction, **{self.x: x_new, self.prev: x})


class StaggeredKernel(Kernel):
    """
    Stormer-Verlet on first-order systems: the rate lives at half steps and
    each step drifts the integer-step fields, then kicks the rate.
    """

    layout = Layout.STAGGERED

    def __init__(self, system, cfg, solver_cfg=None, stats=None) -> None:
        super().__init__(system, cfg, solver_cfg, stats)
        b = system.blocks
        s = system.structure
        if s == Structure.CANONICAL:
            self.rate = "v"
            self.m_rate = self._solver(b["M"], "M")
        elif s == Structure.MIXED:
            self.rate = system.fields[0]
            self.m_rate = self._solver(b["M1"], "M1")
            self.m_other = self._solver(b["M2"], "M2")
        elif s == Structure.THREE_FIELD:
            self.rate = "v"
            self.m_rate = self._solver(b["Mv"], "Mv")
            self.m_sigma = self._solver(b["Ms"], "Ms")
        else:
            raise InvalidArgumentError(f"Stormer-Verlet on {system.kind} runs as a recurrence")
        self.rate_prev = f"{self.rate}_prev"
        self.pairs = ((self.rate, self.rate_prev),)

    def _acceleration(self, fields: Mapping[str, np.ndarray]) -> np.ndarray:
        b = self.system.blocks
        s = self.system.structure
        if s == Structure.CANONICAL:
            return self.m_rate(-(b["K"] @ fields["q"]))
        if s == Structure.MIXED:
            return self.m_rate(b["B"] @ fields[self.system.fields[1]])
        return self.m_rate(b["D"] @ fields["sigma"])

    def start(self, values) -> SchemeState:
        fields = {name: _value(values, name) for name in self.system.fields}
        acc = self._acceleration(fields)
        v0 = fields.pop(self.rate)
        h, d = self.h, self.direction
        fields[self.rate] = v0 + 0.5 * h * acc
        fields[self.rate_prev] = v0 - 0.5 * h * acc
        offsets = {name: Fraction(0) for name in fields}
        offsets[self.rate] = d * HALF
        offsets[self.rate_prev] = -d * HALF
        return self._state(fields, offsets)

    def step(self, state: SchemeState) -> SchemeState:
        self._check(state)
        state.require(self.rate, self.direction * HALF)
        h = self.h
        b = self.system.blocks
        s = self.system.structure
        v = state[self.rate]
        new: Dict[str, np.ndarray] = {}
        if s == Structure.CANONICAL:
            new["q"] = state["q"] + h * v
        elif s == Structure.MIXED:
            x2 = self.system.fields[1]
            new[x2] = state[x2] - h * self.m_other(b["B"].T @ v)
        else:
            new["q"] = state["q"] + h * v
            new["sigma"] = self.m_sigma(-(b["D"].T @ new["q"]))
        new[self.rate] = v + h * self._acceleration(new)
        new[self.rate_prev] = v
        return state.advance(self.direction, **new)


class MidpointKernel(Kernel):
    """
    Implicit midpoint on first-order systems, collocated in time.

    Two-field systems are solved either through the Schur complement of the
    block with the block-diagonal mass or monolithically with a general solver.
    Three-field systems always use the monolithic block system.
    """

    layout = Layout.COLLOCATED

    def __init__(self, system, cfg, solver_cfg=None, stats=None) -> None:
        super().__init__(system, cfg, solver_cfg, stats)
        s = system.structure
        h = self.h
        b = system.blocks
        self.path = cfg.midpoint_path
        if s == Structure.THREE_FIELD:
            self.path = MidpointPath.MONOLITHIC
            nv, ns = b["Mv"].shape[0], b["Ms"].shape[0]
            lhs = bmat([
                [b["Mv"], None, -0.5 * h * b["D"]],
                [-0.5 * h * identity(nv), identity(nv), None],
                [None, b["D"].T, b["Ms"]],
            ], format="csr")
            self.sizes = (nv, nv, ns)
            self.block = self._solver(lhs, "three-field", symmetric=False)
        elif s in (Structure.CANONICAL, Structure.MIXED):
            if self.path == MidpointPath.MONOLITHIC:
                mass, J = system.skew_operator()
                self.right = mass + 0.5 * h * J
                self.block = self._solver(mass - 0.5 * h * J, "monolithic", symmetric=False)
            elif s == Structure.CANONICAL:
                M, K = b["M"], b["K"]
                self.A_minus = M - 0.25 * h * h * K
                self.schur = self._solver(M + 0.25 * h * h * K, "schur")
            else:
                x1, x2 = system.fields
                B = b["B"]
                self.keep_first = system.eliminate != x1
                if self.keep_first:
                    S = B @ system.inverse_mass(x2) @ B.T
                    M_keep = b["M1"]
                else:
                    S = B.T @ system.inverse_mass(x1) @ B
                    M_keep = b["M2"]
                S = 0.5 * (S + S.T)
                self.A_minus = M_keep - 0.25 * h * h * S
                self.schur = self._solver(M_keep + 0.25 * h * h * S, "schur")
        else:
            raise InvalidArgumentError(f"midpoint on {system.kind} runs as a recurrence")

    def start(self, values) -> SchemeState:
        fields = {name: _value(values, name) for name in self.system.fields}
        return self._state(fields, {})

    def _monolithic(self, state: SchemeState) -> Dict[str, np.ndarray]:
        names = self.system.fields
        if self.system.structure == Structure.THREE_FIELD:
            b = self.system.blocks
            h = self.h
            v, q, sigma = state["v"], state["q"], state["sigma"]
            rhs = np.concatenate([
                b["Mv"] @ v + 0.5 * h * (b["D"] @ sigma),
                q + 0.5 * h * v,
                np.zeros(self.sizes[2]),
            ])
            sol = self.block(rhs)
            nv = self.sizes[0]
            return {"v": sol[:nv], "q": sol[nv:2 * nv], "sigma": sol[2 * nv:]}
        x = np.concatenate([state[n] for n in names])
        sol = self.block(self.right @ x)
        n1 = state[names[0]].shape[0]
        return {names[0]: sol[:n1], names[1]: sol[n1:]}

    def step(self, state: SchemeState) -> SchemeState:
        self._check(state)
        if self.path == MidpointPath.MONOLITHIC:
            return state.advance(self.direction, **self._monolithic(state))
        h = self.h
        b = self.system.blocks
        if self.system.structure == Structure.CANONICAL:
            v, q = state["v"], state["q"]
            v_new = self.schur(self.A_minus @ v - h * (b["K"] @ q))
            q_new = q + 0.5 * h * (v + v_new)
            return state.advance(self.direction, v=v_new, q=q_new)
        x1, x2 = self.system.fields
        B = b["B"]
        a, c = state[x1], state[x2]
        if self.keep_first:
            a_new = self.schur(self.A_minus @ a + h * (B @ c))
            c_new = c - 0.5 * h * (self.system.inverse_mass(x2) @ (B.T @ (a + a_new)))
        else:
            c_new = self.schur(self.A_minus @ c - h * (B.T @ a))
            a_new = a + 0.5 * h * (self.system.inverse_mass(x1) @ (B @ (c + c_new)))
        return state.advance(self.direction, **{x1: a_new, x2: c_new})


class MomentumKernel(Kernel):
    """Canonical kernel driven in the momentum p = M v: converts at each step."""

    def __init__(self, inner: Kernel) -> None:
        super().__init__(inner.system, inner.cfg, inner.solver_cfg, inner.stats)
        self.inner = inner
        self.layout = inner.layout
        self.M = inner.system.blocks["M"]
        self.mass = self._solver(self.M, "M")
        self.pairs = tuple((a.replace("v", "p"), b.replace("v", "p")) for a, b in inner.pairs)

    def to_velocity(self, state: SchemeState) -> SchemeState:
        return _rename(state, {n: n.replace("p", "v", 1) for n in state.names if n.startswith("p")},
                       lambda p: self.mass(p))

    def to_momentum(self, state: SchemeState) -> SchemeState:
        return _rename(state, {n: n.replace("v", "p", 1) for n in state.names if n.startswith("v")},
                       lambda v: self.M @ v)

    def start(self, values) -> SchemeState:
        values = dict(values)
        if "p" in values:
            values["v"] = self.mass(np.asarray(values.pop("p"), dtype=float))
        return self.to_momentum(self.inner.start(values))

    def step(self, state: SchemeState) -> SchemeState:
        return self.to_momentum(self.inner.step(self.to_velocity(state)))


def _rename(state: SchemeState, mapping: Mapping[str, str], convert) -> SchemeState:
    fields, offsets = {}, {}
    for name, value in state.fields.items():
        if name in mapping:
            fields[mapping[name]] = convert(value)
            offsets[mapping[name]] = state.offsets[name]
        else:
            fields[name] = value
            offsets[name] = state.offsets[name]
    return SchemeState(state.layout, state.step, state.dt, fields, offsets)


def make_kernel(system: DiscreteSystem, cfg: IntegratorConfig, solver_cfg: Optional[SolverConfig] = None,
                stats: Optional[SolverStats] = None) -> Kernel:
    """Pick the stepping kernel for a system and an integrator."""
    s = system.structure
    if cfg.scheme == Scheme.NEWMARK:
        kernel: Kernel = NewmarkKernel(system, cfg, solver_cfg, stats)
    elif s == Structure.SECOND_ORDER:
        kernel = RecurrenceKernel(system, cfg, solver_cfg, stats)
    elif cfg.staggered:
        kernel = StaggeredKernel(system, cfg, solver_cfg, stats)
    else:
        kernel = MidpointKernel(system, cfg, solver_cfg, stats)
    if system.momentum:
        kernel = MomentumKernel(kernel)
    log.debug(f"[STEP] {type(kernel).__name__} for {system.kind} with {cfg.scheme.value}, dt={cfg.dt:.6g}")
    return kernel


def newmark_step(M, K, state: SchemeState, cfg: IntegratorConfig,
                 solver_cfg: Optional[SolverConfig] = None, name: str = "q") -> SchemeState:
    """
    One Newmark step on M x'' = -K x.

    :param state: Newmark state holding (q, v, a) (or name, name_dot, name_ddot).
    :return: State at the next step; the new acceleration solves
        (M + beta dt^2 K) a = -K (x + dt v + dt^2 (1/2 - beta) a).
    """
    if cfg.scheme != Scheme.NEWMARK:
        cfg = replace(cfg, scheme=Scheme.NEWMARK)
    return NewmarkKernel(second_order_system(M, K, name=name), cfg, solver_cfg).step(state)


def stormer_verlet_step(system: DiscreteSystem, state: SchemeState, cfg: IntegratorConfig,
                        solver_cfg: Optional[SolverConfig] = None) -> SchemeState:
    """One staggered leapfrog step; the state must carry its rate at the half step ahead."""
    if not cfg.staggered:
        raise InvalidArgumentError(f"{cfg.scheme.value} is not a staggered scheme")
    return make_kernel(system, cfg, solver_cfg).step(state)


def midpoint_step(system: DiscreteSystem, state: SchemeState, cfg: IntegratorConfig,
                  solver_cfg: Optional[SolverConfig] = None) -> SchemeState:
    """One implicit midpoint step on a collocated state."""
    if cfg.scheme != Scheme.MIDPOINT:
        raise InvalidArgumentError(f"{cfg.scheme.value} is not the implicit midpoint rule")
    if state.staggered:
        raise InvalidStateError("implicit midpoint needs a collocated state")
    return make_kernel(system, cfg, solver_cfg).step(state)


def _expected_reconstruction(cfg: IntegratorConfig) -> Reconstruction:
    return Reconstruction.HALF_STEP if cfg.staggered else Reconstruction.TRAPEZOIDAL


def trapezoidal_reconstruct(q: np.ndarray, velocities: Sequence[np.ndarray], cfg: IntegratorConfig,
                            mode: Optional[Reconstruction] = None) -> np.ndarray:
    """
    Advance the primal variable by one step from velocity samples.

    half-step:   q+ = q + dt v(n+1/2)              velocities = (v(n+1/2),)
    trapezoidal: q+ = q + dt/2 (v(n) + v(n+1))     velocities = (v(n), v(n+1))

    :raises InvalidStateError: if the mode does not match the integrator.
    """
    mode = Reconstruction(mode or cfg.reconstruction)
    expected = _expected_reconstruction(cfg)
    if mode != expected:
        raise InvalidStateError(f"{cfg.scheme.value} reconstructs with '{expected.value}', got '{mode.value}'")
    h = cfg.step_size
    q = np.asarray(q, dtype=float)
    if mode == Reconstruction.HALF_STEP:
        if len(velocities) != 1:
            raise InvalidStateError("half-step reconstruction takes the single velocity v(n+1/2)")
        return q + h * np.asarray(velocities[0], dtype=float)
    if len(velocities) != 2:
        raise InvalidStateError("trapezoidal reconstruction takes the pair (v(n), v(n+1))")
    return q + 0.5 * h * (np.asarray(velocities[0], dtype=float) + np.asarray(velocities[1], dtype=float))


def reconstruct_trajectory(q0: np.ndarray, velocities: Sequence[np.ndarray], cfg: IntegratorConfig) -> List[np.ndarray]:
    """
    Primal trajectory q(0..N) from a velocity sequence: N half-step values for
    staggered schemes, N+1 integer-step values otherwise.
    """
    out = [np.asarray(q0, dtype=float)]
    if cfg.staggered:
        for v in velocities:
            out.append(trapezoidal_reconstruct(out[-1], (v,), cfg))
    else:
        for v0, v1 in zip(velocities[:-1], velocities[1:]):
            out.append(trapezoidal_reconstruct(out[-1], (v0, v1), cfg))
    return out


def velocity_view(system: DiscreteSystem, state: SchemeState) -> SchemeState:
    """State with momenta converted back to velocities (identity for velocity systems)."""
    if not system.momentum:
        return state
    inverse = system.inverse_mass("p")
    return _rename(state, {n: n.replace("p", "v", 1) for n in state.names if n.startswith("p")},
                   lambda p: inverse @ p)
