from dataclasses import dataclass, field
from typing import Callable, Dict, List, Mapping, Optional

import numpy as np

from .formulations import (
    EnergyTrace,
    FormulationSpec,
    Profile,
    build_formulation,
    energy,
    initial_values,
    instantaneous_energy,
)
from .integrators import IntegratorConfig, Kernel, make_kernel
from .state import SchemeState
from .system import DiscreteSystem
from ..linalg.solvers import SolverConfig, SolverStats
from ..utils.logging_utils import log
from ..utils.utils import max_norm


@dataclass
class Trajectory:
    """
    Result of one run.

    states holds every state when the run was asked to keep them (step 0
    included), otherwise only the last one. blew_up_at is the step at which
    the run stopped on a non-finite value or an energy blow-up.
    """

    kind: str
    cfg: IntegratorConfig
    energy: EnergyTrace
    states: List[SchemeState] = field(default_factory=list)
    norms: Dict[str, List[float]] = field(default_factory=dict)
    stats: SolverStats = field(default_factory=SolverStats)
    blew_up_at: Optional[int] = None

    @property
    def final(self) -> SchemeState:
        return self.states[-1]

    @property
    def completed(self) -> bool:
        return self.blew_up_at is None


def _finite(state: SchemeState) -> bool:
    return all(np.all(np.isfinite(v)) for v in state.fields.values())


def simulate(system: DiscreteSystem, values: Mapping[str, np.ndarray], cfg: IntegratorConfig,
             solver_cfg: Optional[SolverConfig] = None, keep_states: bool = True,
             blowup: Optional[float] = None, on_step: Optional[Callable[[SchemeState], None]] = None,
             kernel: Optional[Kernel] = None) -> Trajectory:
    """
    Advance a system cfg.steps steps from collocated initial values.

    :param system: Assembled system.
    :param values: Initial values as returned by initial_values.
    :param cfg: Integrator settings, including the number of steps.
    :param solver_cfg: Linear solver settings.
    :param keep_states: Keep every state instead of the last one only.
    :param blowup: Stop once the instantaneous energy exceeds blowup * H(0).
    :param on_step: Called with every state, step 0 included.
    :param kernel: Prebuilt kernel for this system and integrator.
    :return: Trajectory with energy trace and per-field max norms.
    """
    stats = SolverStats()
    kernel = kernel or make_kernel(system, cfg, solver_cfg, stats)
    state = kernel.start(values)
    trace = EnergyTrace(state.layout.value)
    traj = Trajectory(system.kind, cfg, trace, stats=kernel.stats or stats)
    norms: Dict[str, List[float]] = {name: [] for name in state.names}
    traj.norms = norms

    def record(s: SchemeState) -> None:
        trace.append(s.step, s.step * cfg.dt, energy(system, s, cfg), instantaneous_energy(system, s, cfg))
        for name, value in s.fields.items():
            norms[name].append(max_norm(value))
        if keep_states or not traj.states:
            traj.states.append(s)
        else:
            traj.states[-1] = s
        if on_step is not None:
            on_step(s)

    record(state)
    start_energy = trace.instantaneous[0]
    for _ in range(cfg.steps):
        state = kernel.step(state)
        if not _finite(state):
            traj.blew_up_at = state.step
            log.warning(f"[STEP] {system.kind}: non-finite values at step {state.step}, run stopped")
            break
        record(state)
        if blowup is not None and trace.instantaneous[-1] > blowup * max(start_energy, np.finfo(float).tiny):
            traj.blew_up_at = state.step
            log.warning(f"[STEP] {system.kind}: energy grew beyond {blowup:.0e} x H(0) at step {state.step}")
            break

    log.debug(f"[STEP] {system.kind}: {len(trace) - 1} steps with {cfg.scheme.value}, "
              f"H {trace.values[0]:.6e} -> {trace.values[-1]:.6e}")
    return traj


def run_formulation(spec: FormulationSpec, profile: Profile, cfg: IntegratorConfig,
                    solver_cfg: Optional[SolverConfig] = None, projection: str = "interpolate",
                    **kwargs) -> Trajectory:
    """Build a formulation, initialize it from a profile and simulate it."""
    system = build_formulation(spec)
    values = initial_values(spec, system, profile, projection, solver_cfg)
    return simulate(system, values, cfg, solver_cfg, **kwargs)
