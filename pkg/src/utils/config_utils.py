import json
from dataclasses import dataclass, field
from numbers import Integral, Real
from typing import Any, Dict, List, Optional, Tuple

from .error_utils import ConfigError, ConfigIssue, WavelabError
from .logging_utils import log
from ..dynamics.formulations import FormulationSpec, Profile, check_admissible, parse_kind
from ..dynamics.integrators import IntegratorConfig, MidpointPath, Reconstruction, Scheme
from ..fem.assembly import MaterialParams
from ..fem.mesh import Mesh, build_interval_mesh, build_rect_mesh
from ..linalg.solvers import SolverConfig

CONFIG_FILE: str = "config.json"

DEFAULT_TOL: float = 1e-12
DEFAULT_CFL_FRACTION: float = 0.9
DEFAULT_EQUIVALENCE_TOL: float = 1e-10
# fields with an exact solution a convergence study can measure
STUDY_FIELDS: Tuple[str, ...] = ("q", "v", "sigma", "E")

REQUIRED = object()

# section -> key -> (type tag, default)
SCHEMA: Dict[str, Dict[str, Tuple[str, Any]]] = {
    "mesh": {
        "dimension": ("int", 1),
        "interval": ("pair", (0.0, 1.0)),
        "n": ("int", None),
        "x_extent": ("pair", (0.0, 1.0)),
        "y_extent": ("pair", (0.0, 1.0)),
        "nx": ("int", None),
        "ny": ("int", None),
    },
    "formulation": {
        "kind": ("str", REQUIRED),
        "degree": ("int", 1),
        "compare_with": ("str", None),
        "projection": ("str", "interpolate"),
    },
    "integrator": {
        "scheme": ("str", REQUIRED),
        "steps": ("int", REQUIRED),
        "dt": ("float", None),
        "cfl_fraction": ("float", None),
        "gamma": ("float", None),
        "beta": ("float", None),
        "reconstruction": ("str", None),
        "midpoint_path": ("str", "schur"),
        "compare_scheme": ("str", None),
    },
    "material": {
        "rho": ("float", 1.0),
        "k_stiff": ("float", 1.0),
        "epsilon": ("float", 1.0),
        "mu": ("float", 1.0),
    },
    "profile": {
        "kind": ("str", "standing-mode"),
        "mode": ("int", 1),
        "amplitude": ("float", 1.0),
    },
    "solver": {
        "method": ("str", None),
        "tol": ("float", DEFAULT_TOL),
        "max_iter": ("int", 10000),
        "restart": ("int", 50),
    },
    "study": {
        "tol": ("float", DEFAULT_EQUIVALENCE_TOL),
        "fractions": ("floats", None),
        "cfl_steps": ("int", 2000),
        "sizes": ("ints", [16, 32, 64]),
        "dt_ratio": ("float", 0.5),
        "final_time": ("float", 1.0),
        "expect_stable": ("bool", True),
        "min_order": ("float", None),
        "field": ("str", None),
    },
    "output": {
        "dir": ("str", "out"),
        "export_matrices": ("bool", False),
    },
}


@dataclass
class RunConfig:
    """
    Validated run configuration: one value per schema key, sections as dicts.
    """

    mesh: Dict[str, Any]
    formulation: Dict[str, Any]
    integrator: Dict[str, Any]
    material: MaterialParams
    profile: Profile
    solver: SolverConfig
    study: Dict[str, Any]
    output: Dict[str, Any]
    text: str = ""
    lines: Dict[Tuple[str, str], int] = field(default_factory=dict)

    @property
    def dimension(self) -> int:
        return self.mesh["dimension"]

    @property
    def kind(self) -> str:
        return parse_kind(self.formulation["kind"]).value

    def build_mesh(self) -> Mesh:
        if self.dimension == 1:
            a, b = self.mesh["interval"]
            return build_interval_mesh(a, b, self.mesh["n"])
        return build_rect_mesh(self.mesh["x_extent"], self.mesh["y_extent"], self.mesh["nx"], self.mesh["ny"])

    def formulation_spec(self, mesh: Optional[Mesh] = None, kind: Optional[str] = None) -> FormulationSpec:
        return FormulationSpec(kind or self.formulation["kind"], mesh or self.build_mesh(),
                               self.formulation["degree"], self.material)

    def integrator_config(self, dt: float, scheme: Optional[str] = None) -> IntegratorConfig:
        """Integrator settings with a resolved time step; gamma and beta only apply to the configured scheme."""
        i = self.integrator
        scheme = Scheme(scheme or i["scheme"])
        own = scheme == Scheme(i["scheme"])
        return IntegratorConfig(scheme, dt, i["steps"], gamma=i["gamma"] if own else None,
                                beta=i["beta"] if own else None, reconstruction=i["reconstruction"],
                                midpoint_path=i["midpoint_path"])

    @property
    def cfl_fraction(self) -> Optional[float]:
        if self.integrator["dt"] is not None:
            return None
        return self.integrator["cfl_fraction"] or DEFAULT_CFL_FRACTION


# --- locating keys ---

def locate_keys(text: str) -> Dict[Tuple[str, str], int]:
    """
    1-based line of every key of a JSON document of flat sections:
    (section, "") for section keys and (section, key) for their members.
    """
    lines: Dict[Tuple[str, str], int] = {}
    depth = 0
    line = 1
    section = ""
    i = 0
    n = len(text)
    while i < n:
        ch = text[i]
        if ch == "\n":
            line += 1
        elif ch in "{[":
            depth += 1
        elif ch in "}]":
            depth -= 1
        elif ch == '"':
            j = i + 1
            while j < n and text[j] != '"':
                j += 2 if text[j] == "\\" else 1
            token = text[i + 1:j]
            k = j + 1
            while k < n and text[k] in " \t\r":
                k += 1
            if k < n and text[k] == ":":
                if depth == 1:
                    section = token
                    lines.setdefault((section, ""), line)
                elif depth == 2:
                    lines.setdefault((section, token), line)
            i = j
        i += 1
    return lines


# --- validation ---

def _typed(tag: str, value: Any) -> bool:
    number = isinstance(value, Real) and not isinstance(value, bool)
    if tag == "int":
        return isinstance(value, Integral) and not isinstance(value, bool)
    if tag == "float":
        return number
    if tag == "str":
        return isinstance(value, str)
    if tag == "bool":
        return isinstance(value, bool)
    if tag == "pair":
        return isinstance(value, list) and len(value) == 2 and all(_typed("float", v) for v in value)
    if tag == "floats":
        return isinstance(value, list) and len(value) > 0 and all(_typed("float", v) for v in value)
    if tag == "ints":
        return isinstance(value, list) and len(value) > 0 and all(_typed("int", v) for v in value)
    return False


TYPE_NAMES = {
    "int": "an integer", "float": "a number", "str": "a string", "bool": "true or false",
    "pair": "a list of two numbers", "floats": "a non-empty list of numbers", "ints": "a non-empty list of integers",
}


def _sections(document: Any, lines: Dict[Tuple[str, str], int], issues: List[ConfigIssue]) -> Dict[str, Dict[str, Any]]:
    values: Dict[str, Dict[str, Any]] = {}
    if not isinstance(document, dict):
        issues.append(ConfigIssue("<document>", "top level must be an object of sections", 1, "invalid-type"))
        return values
    for name in document:
        if name not in SCHEMA:
            issues.append(ConfigIssue(name, f"unknown section (known: {', '.join(SCHEMA)})",
                                      lines.get((name, ""), 0), "unknown-key"))
    for name, keys in SCHEMA.items():
        raw = document.get(name, {})
        section_line = lines.get((name, ""), 0)
        if not isinstance(raw, dict):
            issues.append(ConfigIssue(name, "section must be an object", section_line, "invalid-type"))
            raw = {}
        for key in raw:
            if key not in keys:
                issues.append(ConfigIssue(f"{name}.{key}", "unknown key", lines.get((name, key), section_line),
                                          "unknown-key"))
        section: Dict[str, Any] = {}
        for key, (tag, default) in keys.items():
            where = f"{name}.{key}"
            if key not in raw or raw[key] is None:
                if default is REQUIRED:
                    issues.append(ConfigIssue(where, "missing required key", section_line, "missing-key"))
                    section[key] = None
                else:
                    section[key] = default
                continue
            value = raw[key]
            if not _typed(tag, value):
                issues.append(ConfigIssue(where, f"must be {TYPE_NAMES[tag]}, got {json.dumps(value)}",
                                          lines.get((name, key), section_line), "invalid-type"))
                section[key] = default if default is not REQUIRED else None
                continue
            section[key] = tuple(float(v) for v in value) if tag == "pair" else value
        values[name] = section
    return values


def _check(issues: List[ConfigIssue], lines, section: str, key: str, build):
    """Run a constructor and turn its validation error into an issue at the key's line."""
    try:
        return build()
    except WavelabError as e:
        code = e.code if e.code == "compatibility-violation" else "invalid-value"
        issues.append(ConfigIssue(f"{section}.{key}" if key else section, str(e),
                                  lines.get((section, key), lines.get((section, ""), 0)), code))
    except ValueError as e:
        issues.append(ConfigIssue(f"{section}.{key}" if key else section, str(e),
                                  lines.get((section, key), lines.get((section, ""), 0)), "invalid-value"))
    return None


def parse_config(text: str) -> RunConfig:
    """
    Parse and validate a run configuration.

    :param text: JSON document of flat sections (grammar in README.md).
    :return: RunConfig with defaults filled in.
    :raises ConfigError: listing every problem found, each with its line.
    """
    try:
        document = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError([ConfigIssue("<document>", f"invalid JSON: {e.msg}", e.lineno, "invalid-syntax")]) from e

    lines = locate_keys(text)
    issues: List[ConfigIssue] = []
    s = _sections(document, lines, issues)
    if not s:
        raise ConfigError(issues)

    mesh = s["mesh"]
    dimension = mesh["dimension"]
    if dimension not in (1, 2):
        issues.append(ConfigIssue("mesh.dimension", f"must be 1 or 2, got {dimension}",
                                  lines.get(("mesh", "dimension"), lines.get(("mesh", ""), 0)), "invalid-value"))
    reported = {issue.key for issue in issues}
    needed = ("n",) if dimension == 1 else ("nx", "ny")
    for key in needed:
        if f"mesh.{key}" in reported:
            continue
        if mesh[key] is None:
            issues.append(ConfigIssue(f"mesh.{key}", f"missing required key for a {dimension}D mesh",
                                      lines.get(("mesh", ""), 0), "missing-key"))
        elif mesh[key] < 1:
            issues.append(ConfigIssue(f"mesh.{key}", "must be >= 1", lines.get(("mesh", key), 0), "invalid-value"))

    integ = s["integrator"]
    if integ["dt"] is not None and integ["cfl_fraction"] is not None:
        issues.append(ConfigIssue(
            "integrator.dt, integrator.cfl_fraction", "give either 'dt' or 'cfl_fraction', not both",
            lines.get(("integrator", "cfl_fraction"), lines.get(("integrator", "dt"), 0)), "conflicting-keys",
        ))
    if integ["dt"] is not None and not integ["dt"] > 0.0:
        issues.append(ConfigIssue("integrator.dt", "must be positive", lines.get(("integrator", "dt"), 0),
                                  "invalid-value"))
    if integ["cfl_fraction"] is not None and not integ["cfl_fraction"] > 0.0:
        issues.append(ConfigIssue("integrator.cfl_fraction", "must be positive",
                                  lines.get(("integrator", "cfl_fraction"), 0), "invalid-value"))
    if integ["steps"] is not None and integ["steps"] < 0:
        issues.append(ConfigIssue("integrator.steps", "must be >= 0", lines.get(("integrator", "steps"), 0),
                                  "invalid-value"))
    before = len(issues)
    for key, enum in (("scheme", Scheme), ("compare_scheme", Scheme), ("reconstruction", Reconstruction),
                      ("midpoint_path", MidpointPath)):
        if integ[key] is not None:
            _check(issues, lines, "integrator", key, lambda: enum(integ[key]))
    if len(issues) == before and integ["scheme"] is not None and integ["steps"] is not None and integ["steps"] >= 0:
        _check(issues, lines, "integrator", "scheme",
               lambda: IntegratorConfig(integ["scheme"], 1.0, integ["steps"], gamma=integ["gamma"],
                                        beta=integ["beta"], reconstruction=integ["reconstruction"],
                                        midpoint_path=integ["midpoint_path"]))

    form = s["formulation"]
    if form["kind"] is not None:
        kind = _check(issues, lines, "formulation", "kind", lambda: parse_kind(form["kind"]))
        if kind is not None and dimension in (1, 2):
            _check(issues, lines, "formulation", "kind", lambda: check_admissible(kind, dimension))
    if form["compare_with"] is not None:
        other = _check(issues, lines, "formulation", "compare_with", lambda: parse_kind(form["compare_with"]))
        if other is not None and dimension in (1, 2):
            _check(issues, lines, "formulation", "compare_with", lambda: check_admissible(other, dimension))
    degree = form["degree"]
    if not 1 <= degree <= 4 or (dimension == 2 and degree != 1):
        allowed = "1" if dimension == 2 else "1 to 4"
        issues.append(ConfigIssue("formulation.degree", f"must be {allowed} on a {dimension}D mesh, got {degree}",
                                  lines.get(("formulation", "degree"), 0), "invalid-value"))
    if form["projection"] not in ("interpolate", "l2"):
        issues.append(ConfigIssue("formulation.projection", "must be 'interpolate' or 'l2'",
                                  lines.get(("formulation", "projection"), 0), "invalid-value"))

    material = _check(issues, lines, "material", "", lambda: MaterialParams(**s["material"]))
    profile = _check(issues, lines, "profile", "", lambda: Profile(**s["profile"]))
    sol = {k: v for k, v in s["solver"].items() if v is not None}
    solver = _check(issues, lines, "solver", "", lambda: SolverConfig.for_dimension(dimension, **sol))

    study = s["study"]
    if study["cfl_steps"] < 1:
        issues.append(ConfigIssue("study.cfl_steps", "must be >= 1", lines.get(("study", "cfl_steps"), 0),
                                  "invalid-value"))
    if any(n < 1 for n in study["sizes"]):
        issues.append(ConfigIssue("study.sizes", "mesh sizes must be >= 1", lines.get(("study", "sizes"), 0),
                                  "invalid-value"))
    for key in ("tol", "dt_ratio", "final_time"):
        if not study[key] > 0.0:
            issues.append(ConfigIssue(f"study.{key}", "must be positive", lines.get(("study", key), 0),
                                      "invalid-value"))
    if study["field"] is not None and study["field"] not in STUDY_FIELDS:
        issues.append(ConfigIssue("study.field", f"must be one of {', '.join(STUDY_FIELDS)}",
                                  lines.get(("study", "field"), 0), "invalid-value"))

    if issues:
        for issue in issues:
            log.error(f"[CONFIG] {issue}")
        raise ConfigError(issues)

    config = RunConfig(mesh, form, integ, material, profile, solver, study, s["output"], text, lines)
    log.info(f"[CONFIG] {config.kind} on a {dimension}D mesh with {integ['scheme']}, N={integ['steps']}")
    return config


def load_config(path: str = CONFIG_FILE) -> RunConfig:
    """Read a configuration file (UTF-8) and parse it."""
    with open(path, encoding="utf-8") as f:
        return parse_config(f.read())
