import re
from fractions import Fraction

import numpy as np
import pytest

from src.utils.error_utils import (
    AssertionFailure,
    ConfigError,
    ConfigIssue,
    InstabilityError,
    InvalidArgumentError,
    OutputError,
    SolverFailureError,
)
from src.utils.utils import config_hash, format_stamp, make_run_id, max_norm, relative_drift


def test_config_hash_ignores_whitespace():
    assert config_hash('{"a": 1}') == config_hash('{\n  "a":1\n}\n')
    assert config_hash('{"a": 1}') != config_hash('{"a": 2}')
    assert len(config_hash("")) == 64


def test_run_ids_are_unique():
    ids = {make_run_id("compare") for _ in range(50)}
    assert len(ids) == 50
    assert all(re.fullmatch(r"compare-\d{8}T\d{6}-[0-9a-f]{6}", i) for i in ids)


def test_max_norm():
    assert max_norm(np.array([1.0, -3.0, 2.0])) == 3.0
    assert max_norm([]) == 0.0


def test_relative_drift():
    assert relative_drift([2.0, 2.2, 1.9]) == pytest.approx(0.1)
    assert relative_drift([]) == 0.0
    assert relative_drift([0.0, 0.0]) == 0.0
    assert relative_drift([0.0, 1.0]) == float("inf")


@pytest.mark.parametrize("error, code, exit_code", [
    (InvalidArgumentError("x"), "invalid-argument", 2),
    (ConfigError([ConfigIssue("mesh.n", "missing")]), "config-invalid", 2),
    (AssertionFailure("x"), "assertion-failed", 3),
    (InstabilityError("x"), "instability", 3),
    (SolverFailureError("x", 10, 1e-3), "solver-failure", 4),
    (OutputError("x", "out/a.csv"), "io-failure", 1),
])
def test_error_codes(error, code, exit_code):
    assert error.code == code
    assert error.exit_code == exit_code
    assert error.to_dict()["code"] == code


def test_error_details():
    assert SolverFailureError("stalled", 10, 1e-3).to_dict()["iterations"] == 10
    assert OutputError("cannot write", "out/a.csv").to_dict()["path"] == "out/a.csv"
    assert str(ConfigIssue("mesh.n", "missing", 3)) == "line 3: 'mesh.n': missing"
    assert str(ConfigIssue("mesh.n", "missing")).startswith("document")
    assert isinstance(InvalidArgumentError("x"), ValueError)


@pytest.mark.parametrize("step, offset, expected", [
    (3, Fraction(0), "n=3"),
    (3, Fraction(1, 2), "n=7/2"),
    (3, Fraction(-1, 2), "n=5/2"),
    (0, Fraction(-1), "n=-1"),
])
def test_format_stamp(step, offset, expected):
    assert format_stamp(step, offset) == expected
