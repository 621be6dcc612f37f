from dataclasses import dataclass, field, replace
from typing import Dict, List, Mapping, Optional, Sequence

import numpy as np

from ..dynamics.formulations import (
    DIV_CLASS,
    EQUIVALENCE_CLASS,
    FormulationKind,
    FormulationSpec,
    Profile,
    build_formulation,
    initial_values,
)
from ..dynamics.integrators import IntegratorConfig, Scheme
from ..dynamics.simulation import simulate
from ..dynamics.system import DiscreteSystem
from ..fem.assembly import assemble_load, assemble_stiffness_grad, interpolate
from ..fem.mesh import Mesh
from ..fem.spaces import BoundaryCondition, Family, make_space
from ..linalg.eigen import (
    DEFAULT_EIG_TOL,
    cfl_time_step,
    dense_generalized_eigenvalues,
    inverse_power_iteration_genevp,
    largest_eigenpair,
)
from ..linalg.solvers import SolverConfig, solve_spd
from ..utils.error_utils import InvalidArgumentError, SolverFailureError
from ..utils.logging_utils import log

SCAN_STEPS: int = 2000
GROWTH_LIMIT: float = 10.0
BLOWUP_LIMIT: float = 1e100
DENSE_LIMIT: int = 400
# agreement expected between the scanned and predicted thresholds, and with the dense oracle
GAP_LIMIT: float = 0.02
ORACLE_LIMIT: float = 1e-8
POISSON_LIMIT: float = 1e-10


def default_fractions(lo: float = 0.5, hi: float = 1.5, spacing: float = 0.01) -> List[float]:
    """Fractions of the predicted step, ascending, with the given spacing."""
    count = int(round((hi - lo) / spacing)) + 1
    return [round(lo + i * spacing, 10) for i in range(count)]


@dataclass
class SpectrumReport:
    kind: str
    size: int
    lambda_max: float
    lambda_min: Optional[float]
    dt_cfl: float
    iterations: int
    dense: Optional[np.ndarray] = None
    poisson_error: Optional[float] = None

    @property
    def oracle_gap(self) -> Optional[float]:
        """Relative gap between lambda_max and the dense oracle, None without the oracle."""
        if self.dense is None:
            return None
        exact = float(self.dense[-1])
        return abs(self.lambda_max - exact) / exact

    def to_dict(self) -> dict:
        data = {
            "formulation": self.kind,
            "size": self.size,
            "lambda_max": self.lambda_max,
            "lambda_min": self.lambda_min,
            "dt_cfl": self.dt_cfl,
            "iterations": self.iterations,
        }
        if self.dense is not None:
            data["dense_lambda_max"] = float(self.dense[-1])
            data["dense_lambda_min"] = float(self.dense[0])
            data["oracle_gap"] = self.oracle_gap
        if self.poisson_error is not None:
            data["poisson_error"] = self.poisson_error
        return data


def _has_flux_kernel(system: DiscreteSystem) -> bool:
    try:
        kind = FormulationKind(system.kind)
    except ValueError:
        return False
    return EQUIVALENCE_CLASS[kind] == DIV_CLASS


def spectrum(system: DiscreteSystem, solver_cfg: Optional[SolverConfig] = None, tol: float = DEFAULT_EIG_TOL,
             seed: int = 0, dense_limit: int = DENSE_LIMIT) -> SpectrumReport:
    """
    Extreme generalized eigenvalues of the second-order pair (K, M) of a system
    and the explicit step 2 / sqrt(lambda_max).

    lambda_min is None when K is singular (divergence kinds with a natural
    boundary condition). Systems up to dense_limit DOFs also get the dense
    spectrum as an oracle.
    """
    M, K = system.second_order_pair()
    top = largest_eigenpair(K, M, tol=tol, seed=seed, solver_cfg=solver_cfg)
    bottom: Optional[float] = None
    if _has_flux_kernel(system):
        log.info(f"[CFL] {system.kind}: divergence stiffness has a kernel, lambda_min is 0")
    else:
        try:
            bottom = inverse_power_iteration_genevp(K, M, tol=tol, seed=seed, solver_cfg=solver_cfg)
        except SolverFailureError as e:
            log.warning(f"[CFL] {system.kind}: no smallest eigenvalue ({e})")
    dense = dense_generalized_eigenvalues(K, M) if M.shape[0] <= dense_limit else None
    report = SpectrumReport(system.kind, M.shape[0], top.value, bottom, cfl_time_step(top.value),
                            top.iterations, dense)
    log.info(f"[CFL] {system.kind}: lambda_max={top.value:.12g} ({top.iterations} it), "
             f"dt_cfl={report.dt_cfl:.6g}")
    return report


def poisson_error(mesh: Mesh, degree: int = 1, k: float = 1.0,
                  solver_cfg: Optional[SolverConfig] = None) -> Optional[float]:
    """
    Max nodal error of the Dirichlet problem -k u'' = 1 on an interval against
    u = (x - a)(b - x) / (2k), solved with the stiffness of the Lagrange space
    and the load (psi_i, 1). Galerkin solutions are nodally exact in 1D.
    None on 2D meshes.
    """
    if mesh.dimension != 1:
        return None
    (a, b), = mesh.extent
    space = make_space(mesh, Family.CG, degree, BoundaryCondition.DIRICHLET)
    if space.dof_count == 0:
        return 0.0
    load = assemble_load(space, lambda x: np.ones(x.shape[0]))
    u = solve_spd(assemble_stiffness_grad(space, k), load, solver_cfg)
    exact = interpolate(space, lambda x: (x[:, 0] - a) * (b - x[:, 0]) / (2.0 * k))
    error = float(np.max(np.abs(u - exact), initial=0.0))
    log.info(f"[CFL] Poisson check on {space.dof_count} DOFs: max nodal error {error:.3e}")
    return error


@dataclass(frozen=True)
class CflPoint:
    dt: float
    fraction: float
    stable: bool
    growth: float


@dataclass
class CflMap:
    """Stability of an explicit scheme over a grid of time steps."""

    kind: str
    scheme: str
    dt_predicted: float
    points: List[CflPoint] = field(default_factory=list)

    @property
    def threshold(self) -> Optional[float]:
        """Largest step of the stable run of the grid that starts at its smallest step."""
        best = None
        for point in sorted(self.points, key=lambda p: p.dt):
            if not point.stable:
                break
            best = point.dt
        return best

    @property
    def relative_gap(self) -> Optional[float]:
        if self.threshold is None:
            return None
        return abs(self.threshold - self.dt_predicted) / self.dt_predicted

    def to_dict(self) -> dict:
        return {
            "formulation": self.kind,
            "integrator": self.scheme,
            "dt_predicted": self.dt_predicted,
            "threshold": self.threshold,
            "relative_gap": self.relative_gap,
            "points": len(self.points),
        }


def _growth(values: Sequence[float], steps: int) -> float:
    values = np.asarray(values, dtype=float)
    half = (steps + 1) // 2
    first = float(np.max(np.abs(values[:half + 1]), initial=0.0))
    second = float(np.max(np.abs(values[half:]), initial=0.0))
    if first == 0.0:
        return 0.0 if second == 0.0 else np.inf
    return second / first


def scan_time_steps(system: DiscreteSystem, values: Mapping[str, np.ndarray], cfg: IntegratorConfig,
                    dts: Sequence[float], dt_reference: float, solver_cfg: Optional[SolverConfig] = None,
                    steps: int = SCAN_STEPS) -> List[CflPoint]:
    """
    Mark each step size stable or unstable from its instantaneous energy.

    A run is unstable when a value becomes non-finite, the energy passes
    1e100 * H(0), or the maximum over the second half of the run exceeds ten
    times the maximum over the first half.
    """
    if not cfg.explicit:
        raise InvalidArgumentError(f"a CFL scan needs an explicit scheme, got {cfg.scheme.value}")
    points = []
    for dt in dts:
        run_cfg = replace(cfg, dt=float(dt), steps=steps)
        traj = simulate(system, values, run_cfg, solver_cfg, keep_states=False, blowup=BLOWUP_LIMIT)
        if traj.completed:
            growth = _growth(traj.energy.instantaneous, steps)
            stable = bool(growth <= GROWTH_LIMIT)
        else:
            growth, stable = np.inf, False
        points.append(CflPoint(float(dt), float(dt) / dt_reference, stable, float(growth)))
        log.debug(f"[CFL] {system.kind} dt={dt:.6g}: growth {growth:.3e} -> {'stable' if stable else 'unstable'}")
    return points


def cfl_scan(spec: FormulationSpec, profile: Profile, fractions: Optional[Sequence[float]] = None,
             scheme: Scheme = Scheme.STORMER_VERLET, solver_cfg: Optional[SolverConfig] = None,
             steps: int = SCAN_STEPS, seed: int = 0) -> CflMap:
    """
    Empirical stability threshold of an explicit scheme, scanned over fractions
    of the predicted step 2 / sqrt(lambda_max).
    """
    system = build_formulation(spec)
    predicted = spectrum(system, solver_cfg, seed=seed, dense_limit=0).dt_cfl
    values = initial_values(spec, system, profile, solver_cfg=solver_cfg)
    fractions = default_fractions() if fractions is None else sorted(fractions)
    cfg = IntegratorConfig(scheme, predicted, steps)
    result = CflMap(spec.kind.value, cfg.scheme.value, predicted)
    result.points = scan_time_steps(system, values, cfg, [f * predicted for f in fractions], predicted,
                                    solver_cfg, steps)
    log.info(f"[CFL] {spec.kind.value}: predicted {predicted:.6g}, empirical threshold {result.threshold}")
    return result


def cfl_points_table(result: CflMap) -> List[Dict[str, float]]:
    return [{"dt": p.dt, "dt_fraction": p.fraction, "stable": int(p.stable), "growth": p.growth}
            for p in result.points]
