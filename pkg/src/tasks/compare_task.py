from .task import Task
from ..dynamics.formulations import build_formulation
from ..utils.error_utils import AssertionFailure, ConfigError, ConfigIssue
from ..utils.io_utils import EQUIVALENCE_COLUMNS
from ..verification.equivalence import check_equivalence


class CompareTask(Task):
    """
    Runs formulation.kind against formulation.compare_with with one time step
    and fails when their discrepancy exceeds the tolerance.
    """

    command = "compare"

    def _process(self) -> None:
        config = self.config
        other = config.formulation["compare_with"]
        if other is None:
            raise ConfigError([ConfigIssue("formulation.compare_with", "required by the compare command",
                                           config.lines.get(("formulation", ""), 0), "missing-key")])
        mesh = config.build_mesh()
        spec_a = config.formulation_spec(mesh)
        spec_b = config.formulation_spec(mesh, other)
        system_a = build_formulation(spec_a)
        self.export_blocks(system_a, "A_")
        if self.export_matrices:
            self.export_blocks(build_formulation(spec_b), "B_")

        dt = self.resolve_dt(system_a)
        cfg = config.integrator_config(dt)
        scheme_b = config.integrator["compare_scheme"]
        cfg_b = config.integrator_config(dt, scheme_b) if scheme_b else None

        report = check_equivalence(spec_a, spec_b, cfg, config.profile, self.tol, cfg_b, config.solver)
        self.write_csv("compare.csv", EQUIVALENCE_COLUMNS, report.rows)
        self.write_report(report.to_dict())
        if not report.passed:
            raise AssertionFailure(
                f"{spec_a.kind.value} and {spec_b.kind.value} differ by {report.max_discrepancy:.3e} "
                f"> {self.tol:.1e}"
            )
