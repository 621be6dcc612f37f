import os
import sqlite3
from argparse import Namespace
from typing import Dict, Optional, Type

from .tasks.task import Task
from .tasks.simulation_task import EnergyTask, SimulationTask
from .tasks.compare_task import CompareTask
from .tasks.study_task import CflTask, ConvergeTask, SpectrumTask

from .utils.logging_utils import log
from .utils.config_utils import parse_config
from .utils.db_utils import db_path_for, init_db, mark_run
from .utils.error_utils import ConfigError, OutputError, WavelabError
from .utils.io_utils import write_json
from .utils.utils import config_hash, make_run_id

DEFAULT_OUT: str = "out"

TASKS: Dict[str, Type[Task]] = {
    "run": SimulationTask,
    "compare": CompareTask,
    "energy": EnergyTask,
    "cfl": CflTask,
    "converge": ConvergeTask,
    "spectrum": SpectrumTask,
}


def _record(run_id: str, command: str, digest: str, status: str, out_dir: str, detail: str = "") -> None:
    """Ledger write; a broken ledger never fails the command itself."""
    db = db_path_for(out_dir)
    try:
        init_db(db)
        mark_run(run_id, command, digest, status, db, detail)
    except (sqlite3.Error, OSError) as e:
        log.warning(f"[DB] Could not record run {run_id} in {db}: {e}")


def _fail_early(command: str, out_dir: str, error: WavelabError, run_id: str, digest: str) -> int:
    log.error(f"[COMMAND] {command} rejected ({error.code}): {error}")
    if isinstance(error, ConfigError):
        for issue in error.issues:
            log.error(f"[CONFIG] {issue}")
    try:
        write_json(os.path.join(out_dir, f"{command}.json"),
                   {"command": command, "status": "failed", "error": error.to_dict()})
    except OutputError as e:
        log.error(f"[COMMAND] No error report: {e}")
    _record(run_id, command, digest, "failed", out_dir, error.code)
    return error.exit_code


def execute(
    command: str,
    config_path: str,
    out_dir: Optional[str] = None,
    tol: Optional[float] = None,
    seed: int = 0,
    export_matrices: bool = False,
) -> int:
    """
    Load a configuration, run the task of a command and record it in the ledger.

    :param command: One of TASKS.
    :param config_path: Path of the JSON configuration.
    :param out_dir: Output directory, overrides output.dir of the configuration.
    :param tol: Assertion tolerance, overrides study.tol.
    :param seed: Seed of the randomized eigenvalue iterations.
    :param export_matrices: Write every assembled block; the configuration can enable it too.
    :return: Process exit code.
    """
    log.info(f"[COMMAND] {command} --config {config_path}")
    run_id = make_run_id(command)
    try:
        with open(config_path, encoding="utf-8") as f:
            text = f.read()
    except OSError as e:
        return _fail_early(command, out_dir or DEFAULT_OUT,
                           OutputError(f"cannot read configuration: {e.strerror}", config_path), run_id, "")

    digest = config_hash(text)
    try:
        config = parse_config(text)
    except ConfigError as e:
        return _fail_early(command, out_dir or DEFAULT_OUT, e, run_id, digest)

    task = TASKS[command](config, out_dir, tol, seed, export_matrices or None)
    _record(run_id, command, digest, "processing", task.out_dir)
    code = task.run()
    detail = getattr(task.error, "code", "internal-error") if task.error else f"{len(task.artifacts)} artifacts"
    _record(run_id, command, digest, task.status, task.out_dir, detail)
    return code


def _from_args(command: str, args: Namespace) -> int:
    return execute(command, args.config, args.out, args.tol, args.seed, args.export_matrices)


def run_command(args: Namespace) -> int:
    """Handler for `run`: simulate one formulation and write its trajectory."""
    return _from_args("run", args)


def compare_command(args: Namespace) -> int:
    """Handler for `compare`: run two formulations side by side and check their equivalence."""
    return _from_args("compare", args)


def energy_command(args: Namespace) -> int:
    """Handler for `energy`: conserved and instantaneous energy audit."""
    return _from_args("energy", args)


def cfl_command(args: Namespace) -> int:
    """Handler for `cfl`: empirical stability threshold scan."""
    return _from_args("cfl", args)


def converge_command(args: Namespace) -> int:
    """Handler for `converge`: error table under mesh refinement."""
    return _from_args("converge", args)


def spectrum_command(args: Namespace) -> int:
    """Handler for `spectrum`: extreme generalized eigenvalues and the explicit step limit."""
    return _from_args("spectrum", args)
