import csv
import json
import math
import os
from typing import Any, Iterable, List, Mapping, Sequence

import numpy as np
from scipy.sparse import spmatrix

from .error_utils import OutputError
from .logging_utils import log
from ..fem.assembly import export_rows

CSV_SCHEMA: str = "wavelab-csv/1"

EQUIVALENCE_COLUMNS = ("step", "t", "disc_q", "disc_v", "disc_sigma", "H_A", "H_B")
ENERGY_COLUMNS = ("step", "t", "H", "H_inst")
CFL_COLUMNS = ("dt", "dt_fraction", "stable", "growth")
CONVERGENCE_COLUMNS = ("h", "dt", "error", "order")


def _format(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return str(int(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def _jsonable(value: Any) -> Any:
    if isinstance(value, Mapping):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return [_jsonable(v) for v in value.tolist()]
    if isinstance(value, (np.bool_, bool)):
        return bool(value)
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        # JSON has no inf/nan
        return value if math.isfinite(value) else None
    return value


def write_json(path: str, data: Mapping[str, Any]) -> str:
    """
    Write a JSON report (UTF-8, sorted keys). Non-finite numbers become null.

    :raises OutputError: if the file cannot be written.
    """
    try:
        _ensure_dir(path)
        with open(path, "w", encoding="utf-8") as f:
            json.dump(_jsonable(data), f, indent=2, sort_keys=True)
            f.write("\n")
    except OSError as e:
        raise OutputError(f"cannot write report: {e.strerror}", path) from e
    log.info(f"[IO] Wrote {path}")
    return path


def write_csv(path: str, columns: Sequence[str], rows: Iterable[Mapping[str, Any]]) -> str:
    """
    Write a CSV table: a '# wavelab-csv/1' line, a header, then one line per row.
    Missing values are written as empty cells.

    :raises OutputError: if the file cannot be written.
    """
    try:
        _ensure_dir(path)
        with open(path, "w", encoding="utf-8", newline="") as f:
            f.write(f"# {CSV_SCHEMA}\n")
            writer = csv.writer(f, lineterminator="\n")
            writer.writerow(columns)
            count = 0
            for row in rows:
                writer.writerow([_format(row.get(c)) for c in columns])
                count += 1
    except OSError as e:
        raise OutputError(f"cannot write table: {e.strerror}", path) from e
    log.info(f"[IO] Wrote {count} rows to {path}")
    return path


def read_csv(path: str) -> List[dict]:
    """Read back a table written by write_csv; cells stay strings."""
    with open(path, encoding="utf-8", newline="") as f:
        first = f.readline().strip()
        if first != f"# {CSV_SCHEMA}":
            raise OutputError(f"not a {CSV_SCHEMA} table", path)
        return list(csv.DictReader(f))


def write_matrix(path: str, matrix: spmatrix) -> str:
    """
    Export a sparse matrix as 'row,col,value' triplets, 0-based, row-major,
    values with 17 significant digits.
    """
    try:
        _ensure_dir(path)
        with open(path, "w", encoding="utf-8", newline="") as f:
            f.write(f"# {CSV_SCHEMA}\n")
            f.write(f"# shape {matrix.shape[0]} {matrix.shape[1]}\n")
            f.write("row,col,value\n")
            for i, j, v in export_rows(matrix):
                f.write(f"{i},{j},{v:.17g}\n")
    except OSError as e:
        raise OutputError(f"cannot export matrix: {e.strerror}", path) from e
    log.debug(f"[IO] Exported {matrix.shape} matrix to {path}")
    return path


def remove_partial(paths: Iterable[str]) -> None:
    """Delete output files of a failed run."""
    for path in paths:
        try:
            os.remove(path)
            log.info(f"[IO] Removed partial output {path}")
        except FileNotFoundError:
            pass
        except OSError as e:
            log.warning(f"[IO] Could not remove {path}: {e}")


def _ensure_dir(path: str) -> None:
    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)
