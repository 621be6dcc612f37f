import json
from pathlib import Path

import pytest

from src.dynamics.integrators import Scheme
from src.linalg.solvers import SolverMethod
from src.utils.config_utils import load_config, locate_keys, parse_config
from src.utils.error_utils import ConfigError

MINIMAL_1D = """{
    "mesh": {"n": 16},
    "formulation": {"kind": "hamiltonian-vq"},
    "integrator": {"scheme": "stormer-verlet", "steps": 10}
}"""


def _issues(text):
    with pytest.raises(ConfigError) as info:
        parse_config(text)
    return {issue.key: issue for issue in info.value.issues}


def test_defaults_are_filled_in():
    config = parse_config(MINIMAL_1D)
    assert config.dimension == 1
    assert config.mesh["interval"] == (0.0, 1.0)
    assert config.formulation["degree"] == 1
    assert config.formulation["projection"] == "interpolate"
    assert config.solver.method == SolverMethod.DIRECT
    assert config.solver.tol == 1e-12
    assert config.study["tol"] == 1e-10
    assert config.study["sizes"] == [16, 32, 64]
    assert config.study["expect_stable"] is True
    assert config.cfl_fraction == 0.9
    assert config.output["dir"] == "out"
    assert config.profile.mode == 1


def test_2d_defaults_to_conjugate_gradients():
    text = json.dumps({
        "mesh": {"dimension": 2, "nx": 4, "ny": 4},
        "formulation": {"kind": "maxwell-tm-eh"},
        "integrator": {"scheme": "implicit-midpoint", "steps": 5, "dt": 0.01},
    })
    config = parse_config(text)
    assert config.solver.method == SolverMethod.CG
    assert config.cfl_fraction is None
    assert config.build_mesh().n_cells == 32
    assert config.kind == "maxwell-tm-eh"


def test_aliases_are_accepted():
    config = parse_config(MINIMAL_1D.replace('"hamiltonian-vq"', '"mixed-grad-vσ"'))
    assert config.kind == "mixed-grad-vs"
    assert config.formulation_spec().kind.value == "mixed-grad-vs"


def test_integrator_config_resolution():
    text = MINIMAL_1D.replace('"stormer-verlet", "steps": 10',
                              '"newmark", "steps": 10, "beta": 0.0, "compare_scheme": "leapfrog"')
    config = parse_config(text)
    own = config.integrator_config(0.01)
    assert own.scheme == Scheme.NEWMARK and own.beta == 0.0
    other = config.integrator_config(0.01, config.integrator["compare_scheme"])
    assert other.scheme == Scheme.LEAPFROG and other.beta == 0.0


def test_dt_and_cfl_fraction_conflict():
    text = """{
    "mesh": {"n": 16},
    "formulation": {"kind": "lagrangian-q"},
    "integrator": {
        "scheme": "leapfrog",
        "steps": 10,
        "dt": 0.01,
        "cfl_fraction": 0.5
    }
}"""
    issue = _issues(text)["integrator.dt, integrator.cfl_fraction"]
    assert issue.code == "conflicting-keys"
    assert issue.line == 8


def test_mixed_grad_is_rejected_in_2d():
    text = json.dumps({
        "mesh": {"dimension": 2, "nx": 4, "ny": 4},
        "formulation": {"kind": "mixed-grad-vs"},
        "integrator": {"scheme": "leapfrog", "steps": 5},
    })
    assert _issues(text)["formulation.kind"].code == "compatibility-violation"


def test_every_issue_is_reported_with_its_line():
    text = """{
    "mesh": {"n": "sixteen"},
    "formulation": {"kind": "heat", "degree": 7},
    "integrator": {"scheme": "runge-kutta", "steps": 10},
    "material": {"rho": -1.0},
    "extras": {}
}"""
    issues = _issues(text)
    assert issues["mesh.n"].code == "invalid-type"
    assert issues["mesh.n"].line == 2
    assert issues["formulation.kind"].line == 3
    assert issues["formulation.degree"].code == "invalid-value"
    assert issues["integrator.scheme"].line == 4
    assert issues["material"].line == 5
    assert issues["extras"].code == "unknown-key"
    assert issues["extras"].line == 6


def test_missing_required_keys():
    issues = _issues('{"mesh": {"n": 4}, "integrator": {"steps": 1}}')
    assert issues["formulation.kind"].code == "missing-key"
    assert issues["integrator.scheme"].code == "missing-key"
    issues = _issues('{"mesh": {"dimension": 2}, "formulation": {"kind": "lagrangian-q"},'
                     ' "integrator": {"scheme": "leapfrog", "steps": 1}}')
    assert set(issues) == {"mesh.nx", "mesh.ny"}


def test_unknown_keys_inside_sections():
    issues = _issues(MINIMAL_1D.replace('"n": 16', '"n": 16, "cells": 16'))
    assert issues["mesh.cells"].code == "unknown-key"
    assert issues["mesh.cells"].line == 2


def test_invalid_json_reports_syntax_error():
    issues = _issues('{\n  "mesh": {"n": 16,}\n}')
    assert issues["<document>"].code == "invalid-syntax"
    assert issues["<document>"].line == 2


@pytest.mark.parametrize("patch", [
    ('"steps": 10', '"steps": -1'),
    ('"steps": 10', '"steps": 10, "dt": 0.0'),
    ('"steps": 10', '"steps": 10, "midpoint_path": "direct"'),
    ('"n": 16', '"n": 0'),
    ('"kind": "hamiltonian-vq"', '"kind": "hamiltonian-vq", "projection": "nodal"'),
    ('"n": 16}', '"n": 16}, "solver": {"tol": 2.0}'),
    ('"n": 16}', '"n": 16}, "study": {"sizes": [16, 0]}'),
    ('"n": 16}', '"n": 16}, "profile": {"mode": 0}'),
    ('"n": 16}', '"n": 16}, "study": {"field": "p"}'),
])
def test_invalid_values(patch):
    with pytest.raises(ConfigError) as info:
        parse_config(MINIMAL_1D.replace(*patch))
    assert all(issue.code == "invalid-value" for issue in info.value.issues)


def test_degree_two_is_1d_only():
    text = json.dumps({
        "mesh": {"dimension": 2, "nx": 4, "ny": 4},
        "formulation": {"kind": "lagrangian-q", "degree": 2},
        "integrator": {"scheme": "leapfrog", "steps": 5},
    })
    assert _issues(text)["formulation.degree"].code == "invalid-value"


def test_config_error_serializes_issues():
    with pytest.raises(ConfigError) as info:
        parse_config('{"mesh": {"n": 4}}')
    data = info.value.to_dict()
    assert data["code"] == "config-invalid"
    assert {"key", "message", "line", "code"} <= set(data["issues"][0])


def test_locate_keys():
    lines = locate_keys('{\n  "mesh": {\n    "n": 4,\n    "interval": [0, 1]\n  },\n  "study": {"tol": 1e-9}\n}')
    assert lines[("mesh", "")] == 2
    assert lines[("mesh", "n")] == 3
    assert lines[("mesh", "interval")] == 4
    assert lines[("study", "tol")] == 6


def test_load_config(tmp_path):
    path = tmp_path / "config.json"
    path.write_text(MINIMAL_1D, encoding="utf-8")
    assert load_config(str(path)).mesh["n"] == 16


def test_reference_configs_parse():
    root = Path(__file__).resolve().parent.parent
    for name in ["config.json", "configs/cfl_scan.json", "configs/convergence.json", "configs/div_pair_2d.json",
                 "configs/maxwell_energy.json", "configs/midpoint_equivalence.json"]:
        load_config(str(root / name))
