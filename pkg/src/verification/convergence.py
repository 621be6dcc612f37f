from dataclasses import dataclass, field
from math import ceil, log as ln
from typing import List, Optional, Sequence

from ..dynamics.formulations import (
    DIV_CLASS,
    GRAD_CLASS,
    MAXWELL_CLASS,
    FormulationSpec,
    Profile,
    build_formulation,
    initial_values,
)
from ..dynamics.integrators import IntegratorConfig, Scheme
from ..dynamics.simulation import simulate
from ..fem.assembly import MaterialParams, l2_error
from ..fem.mesh import Mesh, build_interval_mesh, build_rect_mesh
from ..linalg.solvers import SolverConfig
from ..utils.error_utils import InvalidArgumentError
from ..utils.logging_utils import log
from .equivalence import MAXWELL_ROLES, Observer

# default measured field per equivalence class, produced by every member
CLASS_FIELDS = {GRAD_CLASS: "q", DIV_CLASS: "sigma", MAXWELL_CLASS: "E"}
ERROR_FIELDS = ("q", "v", "sigma", "E")

DT_RATIO: float = 0.5
FINAL_TIME: float = 1.0


@dataclass(frozen=True)
class ConvergenceRow:
    h: float
    dt: float
    error: float
    order: Optional[float]


@dataclass
class ConvergenceTable:
    kind: str
    scheme: str
    field: str
    rows: List[ConvergenceRow] = field(default_factory=list)

    @property
    def orders(self) -> List[float]:
        return [row.order for row in self.rows if row.order is not None]

    @property
    def errors(self) -> List[float]:
        return [row.error for row in self.rows]

    def to_dict(self) -> dict:
        return {
            "formulation": self.kind,
            "integrator": self.scheme,
            "field": self.field,
            "h": [row.h for row in self.rows],
            "errors": self.errors,
            "orders": self.orders,
        }


def time_step_for(h: float, ratio: float = DT_RATIO, final_time: float = FINAL_TIME) -> float:
    """Largest step below ratio * h that divides the final time evenly."""
    return final_time / ceil(final_time / (ratio * h))


def observed_orders(hs: Sequence[float], errors: Sequence[float]) -> List[Optional[float]]:
    orders: List[Optional[float]] = [None]
    for (h0, e0), (h1, e1) in zip(zip(hs[:-1], errors[:-1]), zip(hs[1:], errors[1:])):
        if e0 > 0.0 and e1 > 0.0:
            orders.append(ln(e0 / e1) / ln(h0 / h1))
        else:
            orders.append(None)
    return orders


def _mesh_like(template: Mesh, n: int) -> Mesh:
    if template.dimension == 1:
        (a, b), = template.extent
        return build_interval_mesh(a, b, n)
    (x0, x1), (y0, y1) = template.extent
    return build_rect_mesh((x0, x1), (y0, y1), n, n)


def final_error(spec: FormulationSpec, profile: Profile, cfg: IntegratorConfig,
                solver_cfg: Optional[SolverConfig] = None, name: Optional[str] = None):
    """
    L2 error of one field at the end of a run, measured at the field's own
    time level. Returns (field name, error).

    Fields are read through the common representation of the equivalence
    class, so displacements of velocity-based kinds are reconstructed. The
    default field is the one every member of the class produces.
    """
    name = name or CLASS_FIELDS[spec.equivalence_class]
    if name not in ERROR_FIELDS or (spec.is_maxwell and name != "E"):
        raise InvalidArgumentError(f"{spec.kind.value} has no exact solution for field '{name}'")
    role = MAXWELL_ROLES.get(name, name)
    system = build_formulation(spec)
    values = initial_values(spec, system, profile, solver_cfg=solver_cfg)
    observer = Observer(spec, system, cfg, values)
    last = {}

    def watch(state) -> None:
        last["step"] = state.step
        last["seen"] = observer.observe(state)

    simulate(system, values, cfg, solver_cfg, keep_states=False, on_step=watch)
    seen = last["seen"].get(role)
    if seen is None:
        raise InvalidArgumentError(f"{spec.kind.value} does not produce field '{name}'")
    t = float(last["step"] + seen.offset) * cfg.dt
    error = l2_error(observer.role_space(role), seen.value, profile.exact(spec, name, t))
    return name, error


def convergence_study(kind, scheme: Scheme, profile: Profile, sizes: Sequence[int],
                      template: Optional[Mesh] = None, degree: int = 1,
                      material: Optional[MaterialParams] = None, ratio: float = DT_RATIO,
                      final_time: float = FINAL_TIME, solver_cfg: Optional[SolverConfig] = None,
                      name: Optional[str] = None) -> ConvergenceTable:
    """
    Error against the analytic standing wave on a sequence of meshes.

    :param kind: Formulation id.
    :param scheme: Time integrator; the step is tied to h by time_step_for.
    :param sizes: Subdivisions per direction of each mesh.
    :param template: Mesh giving the domain; [0, 1] when omitted.
    :param name: Field to measure; by default q (grad kinds), sigma (div kinds) or E.
    """
    if not sizes:
        raise InvalidArgumentError("a convergence study needs at least one mesh size")
    template = template or build_interval_mesh(0.0, 1.0, 1)
    material = material or MaterialParams()
    hs, dts, errors = [], [], []
    measured = name
    for n in sizes:
        mesh = _mesh_like(template, n)
        spec = FormulationSpec(kind, mesh, degree, material)
        dt = time_step_for(mesh.h, ratio, final_time)
        cfg = IntegratorConfig(scheme, dt, int(round(final_time / dt)))
        measured, error = final_error(spec, profile, cfg, solver_cfg, name)
        hs.append(mesh.h)
        dts.append(dt)
        errors.append(error)
        log.info(f"[CONVERGE] {spec.kind.value} n={n}: h={mesh.h:.4g}, dt={dt:.4g}, {measured} error {error:.6e}")

    table = ConvergenceTable(spec.kind.value, IntegratorConfig(scheme, 1.0).scheme.value, measured)
    for h, dt, error, order in zip(hs, dts, errors, observed_orders(hs, errors)):
        table.rows.append(ConvergenceRow(h, dt, error, order))
    return table
