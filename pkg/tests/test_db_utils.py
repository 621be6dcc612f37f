import os

from src.utils.db_utils import db_path_for, get_run_status, init_db, list_runs, mark_run


def test_ledger_lifecycle(tmp_path):
    db = db_path_for(str(tmp_path / "out"))
    init_db(db)
    assert os.path.exists(db)
    assert get_run_status("run-1", db) is None

    mark_run("run-1", "compare", "abc", "processing", db)
    mark_run("run-1", "compare", "abc", "success", db, "2 artifacts")
    mark_run("run-2", "cfl", "def", "failed", db, "assertion-failed")

    assert get_run_status("run-1", db) == "success"
    runs = list_runs(db)
    assert [r["run_id"] for r in runs] == ["run-1", "run-2"]
    first = runs[0]
    assert first["detail"] == "2 artifacts"
    assert first["finished_at"] is not None
    assert first["started_at"] <= first["finished_at"]
    assert [r["run_id"] for r in list_runs(db, "cfl")] == ["run-2"]


def test_init_is_idempotent(tmp_path):
    db = db_path_for(str(tmp_path))
    init_db(db)
    mark_run("run-1", "run", "abc", "processing", db)
    init_db(db)
    assert list_runs(db)[0]["finished_at"] is None
