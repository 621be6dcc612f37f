from dataclasses import dataclass, replace
from typing import Optional

from ..dynamics.formulations import EnergyTrace, FormulationSpec, Profile
from ..dynamics.integrators import IntegratorConfig
from ..dynamics.simulation import run_formulation
from ..linalg.solvers import SolverConfig
from ..utils.logging_utils import log

# an instantaneous energy above this multiple of H(0) marks a run unstable
GROWTH_LIMIT: float = 10.0


@dataclass
class EnergyAudit:
    """Energy trace of one run plus its summary."""

    kind: str
    integrator: str
    dt: float
    trace: EnergyTrace
    unstable: bool
    stopped_at: Optional[int] = None

    @property
    def relative_drift(self) -> float:
        return self.trace.relative_drift()

    @property
    def oscillation(self) -> float:
        return self.trace.oscillation()

    def to_dict(self) -> dict:
        return {
            "formulation": self.kind,
            "integrator": self.integrator,
            "dt": self.dt,
            "N": len(self.trace) - 1,
            "energy_form": self.trace.form,
            "H0": self.trace.initial,
            "relative_drift": self.relative_drift,
            "oscillation": self.oscillation,
            "unstable": self.unstable,
            "stopped_at": self.stopped_at,
        }


def energy_audit(spec: FormulationSpec, cfg: IntegratorConfig, profile: Profile,
                 solver_cfg: Optional[SolverConfig] = None, growth_limit: float = GROWTH_LIMIT) -> EnergyAudit:
    """
    Run a formulation and record its conserved and instantaneous energies.

    A run whose instantaneous energy exceeds growth_limit * H(0) is stopped and
    reported as unstable instead of raising.
    """
    traj = run_formulation(spec, profile, cfg, solver_cfg, keep_states=False, blowup=growth_limit)
    audit = EnergyAudit(spec.kind.value, cfg.scheme.value, cfg.dt, traj.energy,
                        unstable=not traj.completed, stopped_at=traj.blew_up_at)
    if audit.unstable:
        log.warning(f"[ENERGY] {spec.kind.value} with {cfg.scheme.value} at dt={cfg.dt:.6g} "
                    f"is unstable: energy grew beyond {growth_limit:g} x H(0) at step {traj.blew_up_at}")
    else:
        log.info(f"[ENERGY] {spec.kind.value} with {cfg.scheme.value}: H0={audit.trace.initial:.12e}, "
                 f"relative drift {audit.relative_drift:.3e}, oscillation {audit.oscillation:.3e}")
    return audit


def oscillation_ratio(spec: FormulationSpec, cfg: IntegratorConfig, profile: Profile,
                      solver_cfg: Optional[SolverConfig] = None) -> float:
    """
    Ratio of the instantaneous-energy oscillation at dt and at dt/2 over the
    same final time; close to 4 for a second-order deviation.
    """
    coarse = energy_audit(spec, cfg, profile, solver_cfg)
    fine = energy_audit(spec, replace(cfg, dt=cfg.dt / 2.0, steps=2 * cfg.steps), profile, solver_cfg)
    if fine.oscillation == 0.0:
        return float("nan")
    return coarse.oscillation / fine.oscillation
