import os
import sqlite3
from contextlib import closing
from datetime import datetime, timezone
from typing import List, Optional

from .logging_utils import log

DB_NAME: str = "runs.db"


def db_path_for(out_dir: str) -> str:
    return os.path.join(out_dir, DB_NAME)


def _now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def init_db(db_path: str) -> None:
    """
    Initialize the run ledger, creating the output directory and table.

    :param db_path: Path to the SQLite database file.
    """
    directory = os.path.dirname(db_path)
    if directory:
        os.makedirs(directory, exist_ok=True)

    with closing(sqlite3.connect(db_path)) as conn:
        c = conn.cursor()
        c.execute("""
            CREATE TABLE IF NOT EXISTS runs (
                run_id      TEXT PRIMARY KEY,
                command     TEXT,
                config_hash TEXT,
                status      TEXT,
                started_at  TEXT,
                finished_at TEXT,
                detail      TEXT
            )
        """)
        conn.commit()


def mark_run(
    run_id: str,
    command: str,
    config_hash: str,
    status: str,
    db_path: str,
    detail: str = "",
) -> None:
    """
    Insert or update the status of a run.

    :param run_id: Identifier of the run.
    :param command: CLI subcommand that produced it.
    :param config_hash: SHA-256 of the configuration text.
    :param status: One of "processing", "success", "failed".
    :param db_path: Path to the SQLite database file.
    :param detail: Error code or summary line.
    """
    with closing(sqlite3.connect(db_path)) as conn:
        c = conn.cursor()
        c.execute("SELECT started_at FROM runs WHERE run_id = ?", (run_id,))
        row = c.fetchone()
        started = row[0] if row else _now()
        finished = None if status == "processing" else _now()
        c.execute(
            "INSERT OR REPLACE INTO runs (run_id, command, config_hash, status, started_at, finished_at, detail) "
            "VALUES (?, ?, ?, ?, ?, ?, ?)",
            (run_id, command, config_hash, status, started, finished, detail),
        )
        conn.commit()
    log.info(f"[DB] Run {run_id} ({command}) marked as {status}")


def get_run_status(run_id: str, db_path: str) -> Optional[str]:
    """
    :return: Status of the run, or None if it was never recorded.
    """
    with closing(sqlite3.connect(db_path)) as conn:
        c = conn.cursor()
        c.execute("SELECT status FROM runs WHERE run_id = ?", (run_id,))
        result = c.fetchone()
        return result[0] if result else None


def list_runs(db_path: str, command: Optional[str] = None) -> List[dict]:
    """All recorded runs, oldest first, optionally of one command only."""
    with closing(sqlite3.connect(db_path)) as conn:
        conn.row_factory = sqlite3.Row
        c = conn.cursor()
        if command is None:
            c.execute("SELECT * FROM runs ORDER BY started_at, rowid")
        else:
            c.execute("SELECT * FROM runs WHERE command = ? ORDER BY started_at, rowid", (command,))
        return [dict(row) for row in c.fetchall()]
