from .task import Task
from ..dynamics.formulations import build_formulation, initial_values, is_physical_energy
from ..dynamics.simulation import simulate
from ..utils.error_utils import InstabilityError
from ..utils.io_utils import ENERGY_COLUMNS
from ..utils.logging_utils import log
from ..verification.energy import energy_audit


class SimulationTask(Task):
    """
    Runs one formulation and writes its trajectory summary: energy and the
    max norm of every field at every step.
    """

    command = "run"

    def _process(self) -> None:
        config = self.config
        spec = config.formulation_spec()
        system = build_formulation(spec)
        self.export_blocks(system)
        values = initial_values(spec, system, config.profile, config.formulation["projection"], config.solver)
        cfg = config.integrator_config(self.resolve_dt(system))

        traj = simulate(system, values, cfg, config.solver, keep_states=False)
        fields = list(traj.norms)
        trace = traj.energy
        rows = []
        for n, (step, t, h) in enumerate(zip(trace.steps, trace.times, trace.values)):
            row = {"step": step, "t": t, "H": h}
            row.update({f"norm_{name}": traj.norms[name][n] for name in fields})
            rows.append(row)
        self.write_csv("run.csv", ["step", "t", "H"] + [f"norm_{name}" for name in fields], rows)

        report = {
            "formulation": spec.kind.value,
            "integrator": cfg.scheme.value,
            "dt": cfg.dt,
            "N": cfg.steps,
            "dofs": {name: system.size(name) for name in system.fields},
            "energy_form": trace.form,
            "physical_energy": is_physical_energy(spec.kind),
            "H0": trace.initial,
            "relative_drift": trace.relative_drift(),
            "final_norms": {name: traj.norms[name][-1] for name in fields},
            "solver": traj.stats.to_dict(),
            "completed": traj.completed,
            "stopped_at": traj.blew_up_at,
        }
        self.write_report(report)
        if not traj.completed and config.study["expect_stable"]:
            raise InstabilityError(f"{spec.kind.value} produced non-finite values at step {traj.blew_up_at}")
        log.info(f"[TASK] run: {spec.kind.value}, {len(rows)} states written")


class EnergyTask(Task):
    """Energy audit of one formulation: conserved and instantaneous energy per step."""

    command = "energy"

    def _process(self) -> None:
        config = self.config
        spec = config.formulation_spec()
        system = build_formulation(spec)
        cfg = config.integrator_config(self.resolve_dt(system))

        audit = energy_audit(spec, cfg, config.profile, config.solver)
        trace = audit.trace
        self.write_csv("energy.csv", ENERGY_COLUMNS,
                       ({"step": s, "t": t, "H": h, "H_inst": hi} for s, t, h, hi in trace.rows()))
        report = audit.to_dict()
        report["physical_energy"] = is_physical_energy(spec.kind)
        report["tol"] = self.tol
        self.write_report(report)
        if audit.unstable and config.study["expect_stable"]:
            raise InstabilityError(
                f"{spec.kind.value} with {cfg.scheme.value} at dt={cfg.dt:.6g} is unstable "
                f"(stopped at step {audit.stopped_at})"
            )
