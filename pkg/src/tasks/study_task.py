import numpy as np

from .task import Task
from ..dynamics.formulations import build_formulation
from ..utils.error_utils import AssertionFailure, InstabilityError
from ..utils.io_utils import CFL_COLUMNS, CONVERGENCE_COLUMNS
from ..utils.logging_utils import log
from ..verification.convergence import convergence_study
from ..verification.stability import (
    GAP_LIMIT,
    ORACLE_LIMIT,
    POISSON_LIMIT,
    cfl_points_table,
    cfl_scan,
    poisson_error,
    spectrum,
)


class CflTask(Task):
    """Scans fractions of the predicted explicit step and locates the empirical threshold."""

    command = "cfl"

    def _process(self) -> None:
        config = self.config
        study = config.study
        spec = config.formulation_spec()
        result = cfl_scan(spec, config.profile, study["fractions"], config.integrator["scheme"],
                          config.solver, steps=study["cfl_steps"], seed=self.seed)
        self.write_csv("cfl.csv", CFL_COLUMNS, cfl_points_table(result))
        report = result.to_dict()
        report["gap_limit"] = GAP_LIMIT
        self.write_report(report)
        if result.threshold is None:
            raise InstabilityError(f"{spec.kind.value}: no scanned time step is stable")
        if result.relative_gap > GAP_LIMIT:
            raise AssertionFailure(
                f"{spec.kind.value}: empirical threshold {result.threshold:.6g} is "
                f"{100 * result.relative_gap:.1f}% away from the predicted {result.dt_predicted:.6g}"
            )


class ConvergeTask(Task):
    """Error table against the analytic standing wave on the meshes of study.sizes."""

    command = "converge"

    def _process(self) -> None:
        config = self.config
        study = config.study
        table = convergence_study(
            config.formulation["kind"], config.integrator["scheme"], config.profile, study["sizes"],
            template=config.build_mesh(), degree=config.formulation["degree"], material=config.material,
            ratio=study["dt_ratio"], final_time=study["final_time"], solver_cfg=config.solver,
            name=study["field"],
        )
        self.write_csv("converge.csv", CONVERGENCE_COLUMNS,
                       ({"h": r.h, "dt": r.dt, "error": r.error, "order": r.order} for r in table.rows))
        self.write_report(table.to_dict())
        if not np.all(np.isfinite(table.errors)):
            raise InstabilityError(f"{table.kind}: non-finite error in the convergence study")
        expected = study["min_order"]
        if expected is not None and table.orders and table.orders[-1] < expected:
            raise AssertionFailure(f"{table.kind}: observed order {table.orders[-1]:.3f} < {expected}")


class SpectrumTask(Task):
    """Extreme generalized eigenvalues of a formulation and its explicit step limit."""

    command = "spectrum"

    def _process(self) -> None:
        config = self.config
        spec = config.formulation_spec()
        system = build_formulation(spec)
        self.export_blocks(system)
        report = spectrum(system, config.solver, seed=self.seed)
        report.poisson_error = poisson_error(spec.mesh, spec.degree, spec.material.k_stiff, config.solver)

        rows = [{"index": "max", "lambda": report.lambda_max, "source": "power"}]
        if report.lambda_min is not None:
            rows.append({"index": "min", "lambda": report.lambda_min, "source": "inverse"})
        if report.dense is not None:
            rows.extend({"index": i, "lambda": lam, "source": "dense"} for i, lam in enumerate(report.dense))
        self.write_csv("spectrum.csv", ("index", "lambda", "source"), rows)
        self.write_report(report.to_dict())

        gap = report.oracle_gap
        if gap is not None:
            log.info(f"[CFL] dense oracle gap {gap:.3e}")
            if gap > ORACLE_LIMIT:
                raise AssertionFailure(f"{report.kind}: lambda_max is {gap:.3e} away from the dense oracle")
        if report.poisson_error is not None and report.poisson_error > POISSON_LIMIT:
            raise AssertionFailure(f"Poisson solve is off by {report.poisson_error:.3e} at the nodes")
