import os
import time
from typing import Any, Dict, Iterable, List, Mapping, Optional, Sequence

from ..dynamics.system import DiscreteSystem
from ..linalg.eigen import cfl_time_step, largest_eigenpair
from ..utils.config_utils import RunConfig
from ..utils.error_utils import AssertionFailure, InstabilityError, WavelabError
from ..utils.io_utils import remove_partial, write_csv, write_json, write_matrix
from ..utils.logging_utils import log


class Task:
    """
    Generic batch task: one per CLI command.
    Subclasses must implement `_process()` and may override `cleanup()`.
    """

    command: str = "task"

    def __init__(
        self,
        config: RunConfig,
        out_dir: Optional[str] = None,
        tol: Optional[float] = None,
        seed: int = 0,
        export_matrices: Optional[bool] = None,
    ) -> None:
        """
        :param config: validated run configuration
        :param out_dir: output directory, overrides output.dir
        :param tol: assertion tolerance, overrides study.tol
        :param seed: seed of the randomized eigenvalue iterations
        :param export_matrices: write assembled blocks, overrides output.export_matrices
        """
        self.config = config
        self.out_dir = out_dir or config.output["dir"]
        self.tol = config.study["tol"] if tol is None else tol
        self.seed = seed
        self.export_matrices = config.output["export_matrices"] if export_matrices is None else export_matrices
        self.created_at = time.monotonic()
        self.status = "pending"
        self.artifacts: List[str] = []
        self.error: Optional[BaseException] = None
        self.summary: Dict[str, Any] = {}

    def run(self) -> int:
        """
        Wraps `_process()` with error handling and ensures `cleanup()` runs.

        :return: process exit code, 0 on success.
        """
        self.status = "running"
        log.info(f"[TASK] {self.command} started, output in {self.out_dir}")
        try:
            self._process()
            self.status = "success"
            return 0
        except WavelabError as e:
            self.status = "failed"
            self.error = e
            log.error(f"[TASK] {self.command} failed ({e.code}): {e}")
            return e.exit_code
        except Exception as e:
            self.status = "failed"
            self.error = e
            log.error(f"[TASK] {self.command} crashed: {e}", exc_info=True)
            return 1
        finally:
            self.cleanup()
            log.info(f"[TASK] {self.command} {self.status} in {time.monotonic() - self.created_at:.2f}s")

    def _process(self) -> None:
        """
        Main work of the task. Must be implemented by subclasses.
        """
        raise NotImplementedError

    def cleanup(self) -> None:
        """
        Called after `_process()` or on error. A failed task loses its partial
        outputs, except when an assertion failed on complete results; either
        way it leaves a JSON error report behind.
        """
        if self.status != "failed":
            return
        keep = isinstance(self.error, (AssertionFailure, InstabilityError))
        if not keep:
            log.info(f"[CLEANUP] Removing {len(self.artifacts)} partial outputs of {self.command}")
            remove_partial(self.artifacts)
            self.artifacts = []
        report = {"command": self.command, "status": "failed", **self.summary}
        if isinstance(self.error, WavelabError):
            report["error"] = self.error.to_dict()
        else:
            report["error"] = {"code": "internal-error", "message": str(self.error)}
        try:
            self.artifacts.append(write_json(self.path(f"{self.command}.json"), report))
        except WavelabError as e:
            log.error(f"[CLEANUP] No error report for {self.command}: {e}")

    # --- helpers for subclasses ---

    def path(self, name: str) -> str:
        return os.path.join(self.out_dir, name)

    def write_json(self, name: str, data: Mapping[str, Any]) -> str:
        path = self.path(name)
        self.artifacts.append(path)
        return write_json(path, data)

    def write_csv(self, name: str, columns: Sequence[str], rows: Iterable[Mapping[str, Any]]) -> str:
        path = self.path(name)
        self.artifacts.append(path)
        return write_csv(path, columns, rows)

    def write_report(self, data: Mapping[str, Any]) -> str:
        self.summary = dict(data)
        return self.write_json(f"{self.command}.json", {"command": self.command, "status": "success", **data})

    def export_blocks(self, system: DiscreteSystem, prefix: str = "") -> None:
        """Write every assembled block of a system in coordinate format."""
        if not self.export_matrices:
            return
        for name, matrix in system.blocks.items():
            path = self.path(os.path.join("matrices", f"{prefix}{system.kind}_{name}.csv"))
            self.artifacts.append(path)
            write_matrix(path, matrix)
        log.info(f"[TASK] Exported {len(system.blocks)} blocks of {system.kind}")

    def resolve_dt(self, system: DiscreteSystem) -> float:
        """Configured time step, or a fraction of the explicit step 2 / sqrt(lambda_max)."""
        if self.config.integrator["dt"] is not None:
            return float(self.config.integrator["dt"])
        fraction = self.config.cfl_fraction
        M, K = system.second_order_pair()
        top = largest_eigenpair(K, M, seed=self.seed, solver_cfg=self.config.solver)
        dt = fraction * cfl_time_step(top.value)
        log.info(f"[TASK] dt = {fraction:g} x {cfl_time_step(top.value):.6g} = {dt:.6g}")
        return dt
