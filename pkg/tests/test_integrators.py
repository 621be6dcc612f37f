from dataclasses import replace

import numpy as np
import pytest

from src.dynamics.formulations import FormulationSpec, Profile, build_formulation, energy, initial_values
from src.dynamics.integrators import (
    IntegratorConfig,
    MidpointPath,
    Reconstruction,
    Scheme,
    make_kernel,
    midpoint_step,
    newmark_step,
    reconstruct_trajectory,
    stormer_verlet_step,
    trapezoidal_reconstruct,
)
from src.dynamics.simulation import simulate
from src.dynamics.state import HALF, Layout
from src.linalg.eigen import cfl_time_step, dense_generalized_eigenvalues
from src.utils.error_utils import InvalidArgumentError, InvalidStateError
from src.verification.equivalence import second_difference_residual


def _explicit_dt(system, fraction=0.9):
    M, K = system.second_order_pair()
    return fraction * cfl_time_step(dense_generalized_eigenvalues(K, M)[-1])


def _setup(mesh, kind):
    spec = FormulationSpec(kind, mesh)
    system = build_formulation(spec)
    return spec, system, initial_values(spec, system, Profile())


# --- configuration ---

def test_named_schemes_fix_newmark_parameters():
    assert (IntegratorConfig(Scheme.LEAPFROG, 0.1).gamma, IntegratorConfig(Scheme.LEAPFROG, 0.1).beta) == (0.5, 0.0)
    cfg = IntegratorConfig("implicit-midpoint", 0.1)
    assert (cfg.gamma, cfg.beta) == (0.5, 0.25)
    assert cfg.reconstruction == Reconstruction.TRAPEZOIDAL
    assert IntegratorConfig(Scheme.STORMER_VERLET, 0.1).reconstruction == Reconstruction.HALF_STEP
    with pytest.raises(InvalidArgumentError):
        IntegratorConfig(Scheme.LEAPFROG, 0.1, beta=0.25)


def test_newmark_defaults_and_explicitness():
    cfg = IntegratorConfig(Scheme.NEWMARK, 0.1)
    assert (cfg.gamma, cfg.beta) == (0.5, 0.25)
    assert not cfg.explicit
    assert IntegratorConfig(Scheme.NEWMARK, 0.1, gamma=0.5, beta=0.0).explicit
    assert IntegratorConfig(Scheme.STORMER_VERLET, 0.1).explicit


@pytest.mark.parametrize("kwargs", [
    {"dt": 0.0}, {"dt": -1.0}, {"dt": float("inf")}, {"steps": -1}, {"steps": 2.5},
    {"scheme": "runge-kutta"}, {"midpoint_path": "direct"}, {"beta": -0.1},
])
def test_integrator_config_validation(kwargs):
    args = {"scheme": Scheme.NEWMARK, "dt": 0.1, **kwargs}
    with pytest.raises(InvalidArgumentError):
        IntegratorConfig(**args)


def test_reversed_config_steps_backwards():
    cfg = IntegratorConfig(Scheme.MIDPOINT, 0.2, 10)
    assert cfg.reversed().step_size == pytest.approx(-0.2)
    assert cfg.reversed().reversed().step_size == pytest.approx(0.2)
    assert cfg.final_time == pytest.approx(2.0)


# --- kernels ---

def test_newmark_without_beta_is_leapfrog(mesh_1d):
    spec, system, values = _setup(mesh_1d, "lagrangian-q")
    dt = _explicit_dt(system)
    newmark = simulate(system, values, IntegratorConfig(Scheme.NEWMARK, dt, 200, gamma=0.5, beta=0.0))
    leapfrog = simulate(system, values, IntegratorConfig(Scheme.LEAPFROG, dt, 200))
    scale = np.max(np.abs(values["q"]))
    assert len(newmark.states) == len(leapfrog.states) == 201
    for a, b in zip(newmark.states, leapfrog.states):
        assert a.step == b.step
        assert np.max(np.abs(a["q"] - b["q"])) <= 1e-10 * scale


def test_newmark_levels_satisfy_leapfrog_recurrence(mesh_1d):
    spec, system, values = _setup(mesh_1d, "lagrangian-q")
    dt = _explicit_dt(system)
    traj = simulate(system, values, IntegratorConfig(Scheme.NEWMARK, dt, 100, gamma=0.5, beta=0.0))
    levels = [s["q"] for s in traj.states]
    assert second_difference_residual(system.blocks["M"], system.blocks["K"], levels, dt) <= 1e-12


def test_average_acceleration_satisfies_averaged_recurrence(mesh_1d):
    spec, system, values = _setup(mesh_1d, "lagrangian-q")
    dt = 2.0 * _explicit_dt(system)
    traj = simulate(system, values, IntegratorConfig(Scheme.NEWMARK, dt, 100))
    levels = [s["q"] for s in traj.states]
    assert second_difference_residual(system.blocks["M"], system.blocks["K"], levels, dt, average=True) <= 1e-12


def test_newmark_step_matches_kernel(mesh_1d):
    spec, system, values = _setup(mesh_1d, "lagrangian-q")
    cfg = IntegratorConfig(Scheme.NEWMARK, 0.01, 1)
    kernel = make_kernel(system, cfg)
    state = kernel.start(values)
    a = newmark_step(system.blocks["M"], system.blocks["K"], state, cfg)
    b = kernel.step(state)
    assert a.step == b.step == 1
    assert a.max_difference(b) <= 1e-14


def test_newmark_needs_second_order_system(mesh_1d):
    spec, system, values = _setup(mesh_1d, "hamiltonian-vq")
    with pytest.raises(InvalidArgumentError):
        make_kernel(system, IntegratorConfig(Scheme.NEWMARK, 0.01))


def test_stormer_verlet_kick_start(mesh_1d):
    spec, system, values = _setup(mesh_1d, "hamiltonian-vq")
    cfg = IntegratorConfig(Scheme.STORMER_VERLET, 0.01, 1)
    state = make_kernel(system, cfg).start(values)
    assert state.layout == Layout.STAGGERED
    assert state.offsets["v"] == HALF
    assert state.offsets["v_prev"] == -HALF
    assert np.allclose(0.5 * (state["v"] + state["v_prev"]), values["v"], atol=1e-14)
    nxt = stormer_verlet_step(system, state, cfg)
    assert np.allclose(nxt["q"], values["q"] + 0.01 * state["v"], atol=1e-14)
    assert nxt["v_prev"] is state["v"]


def test_stormer_verlet_step_rejects_implicit_scheme(mesh_1d):
    spec, system, values = _setup(mesh_1d, "hamiltonian-vq")
    cfg = IntegratorConfig(Scheme.MIDPOINT, 0.01, 1)
    with pytest.raises(InvalidArgumentError):
        stormer_verlet_step(system, make_kernel(system, cfg).start(values), cfg)


def test_staggered_step_rejects_misplaced_rate(mesh_1d):
    spec, system, values = _setup(mesh_1d, "hamiltonian-vq")
    cfg = IntegratorConfig(Scheme.STORMER_VERLET, 0.01, 1)
    kernel = make_kernel(system, cfg)
    state = kernel.reverse(kernel.start(values))
    with pytest.raises(InvalidStateError):
        kernel.step(state)


def test_midpoint_step_rejects_staggered_state(mesh_1d):
    spec, system, values = _setup(mesh_1d, "hamiltonian-vq")
    staggered = make_kernel(system, IntegratorConfig(Scheme.STORMER_VERLET, 0.01)).start(values)
    with pytest.raises(InvalidStateError):
        midpoint_step(system, staggered, IntegratorConfig(Scheme.MIDPOINT, 0.01))


@pytest.mark.parametrize("kind", ["hamiltonian-vq", "mixed-grad-vs", "mixed-div-vs"])
def test_midpoint_schur_and_monolithic_agree(coarse_mesh_1d, kind):
    spec, system, values = _setup(coarse_mesh_1d, kind)
    cfg = IntegratorConfig(Scheme.MIDPOINT, 0.05, 40)
    schur = simulate(system, values, cfg)
    mono = simulate(system, values, replace(cfg, midpoint_path=MidpointPath.MONOLITHIC))
    for a, b in zip(schur.states, mono.states):
        assert a.max_difference(b) <= 1e-9


@pytest.mark.parametrize("kind", ["hamiltonian-vq", "mixed-grad-vs", "three-field-vqs"])
def test_midpoint_conserves_collocated_energy(coarse_mesh_1d, kind):
    spec, system, values = _setup(coarse_mesh_1d, kind)
    cfg = IntegratorConfig(Scheme.MIDPOINT, 0.05, 200)
    traj = simulate(system, values, cfg)
    assert traj.energy.relative_drift() <= 1e-10


def test_midpoint_runs_backwards_to_the_start(coarse_mesh_1d):
    spec, system, values = _setup(coarse_mesh_1d, "hamiltonian-vq")
    cfg = IntegratorConfig(Scheme.MIDPOINT, 0.05, 50)
    forward = simulate(system, values, cfg, keep_states=False).final
    kernel = make_kernel(system, cfg.reversed())
    state = kernel.reverse(forward)
    for _ in range(cfg.steps):
        state = kernel.step(state)
    assert state.step == 0
    assert np.max(np.abs(state["q"] - values["q"])) <= 1e-10
    assert np.max(np.abs(state["v"] - values["v"])) <= 1e-10


@pytest.mark.parametrize("kind", ["hamiltonian-vq", "mixed-grad-vs"])
def test_stormer_verlet_is_reversible(coarse_mesh_1d, kind):
    spec, system, values = _setup(coarse_mesh_1d, kind)
    cfg = IntegratorConfig(Scheme.STORMER_VERLET, _explicit_dt(system), 200)
    forward = simulate(system, values, cfg, keep_states=False).final
    kernel = make_kernel(system, cfg.reversed())
    state = kernel.reverse(forward)
    for _ in range(cfg.steps):
        state = kernel.step(state)
    assert state.step == 0
    start = make_kernel(system, cfg).start(values)
    assert state.max_difference(kernel.reverse(start)) <= 1e-10


def test_stormer_verlet_product_energy(mesh_1d):
    spec, system, values = _setup(mesh_1d, "hamiltonian-vq")
    cfg = IntegratorConfig(Scheme.STORMER_VERLET, _explicit_dt(system), 500)
    traj = simulate(system, values, cfg, keep_states=False)
    assert traj.completed
    assert traj.energy.relative_drift() <= 1e-10
    assert energy(system, traj.final, cfg) == pytest.approx(traj.energy.values[-1])


def test_momentum_kernel_tracks_velocity_kernel(coarse_mesh_1d):
    _, vq, values = _setup(coarse_mesh_1d, "hamiltonian-vq")
    _, pq, values_p = _setup(coarse_mesh_1d, "hamiltonian-pq")
    cfg = IntegratorConfig(Scheme.MIDPOINT, 0.05, 20)
    a = simulate(vq, values, cfg, keep_states=False).final
    b = simulate(pq, values_p, cfg, keep_states=False).final
    assert np.allclose(pq.blocks["M"] @ a["v"], b["p"], atol=1e-11)
    assert np.allclose(a["q"], b["q"], atol=1e-11)


# --- reconstruction ---

def test_half_step_reconstruction():
    cfg = IntegratorConfig(Scheme.STORMER_VERLET, 0.5)
    q = trapezoidal_reconstruct(np.zeros(2), (np.array([1.0, 2.0]),), cfg)
    assert np.allclose(q, [0.5, 1.0])


def test_trapezoidal_reconstruction():
    cfg = IntegratorConfig(Scheme.MIDPOINT, 0.5)
    q = trapezoidal_reconstruct(np.ones(2), (np.zeros(2), np.array([2.0, 4.0])), cfg)
    assert np.allclose(q, [1.5, 2.0])


def test_reconstruction_mode_must_match_scheme():
    with pytest.raises(InvalidStateError):
        trapezoidal_reconstruct(np.zeros(2), (np.zeros(2),), IntegratorConfig(Scheme.STORMER_VERLET, 0.5),
                                Reconstruction.TRAPEZOIDAL)
    with pytest.raises(InvalidStateError):
        trapezoidal_reconstruct(np.zeros(2), (np.zeros(2), np.zeros(2)), IntegratorConfig(Scheme.STORMER_VERLET, 0.5))
    with pytest.raises(InvalidStateError):
        trapezoidal_reconstruct(np.zeros(2), (np.zeros(2),), IntegratorConfig(Scheme.MIDPOINT, 0.5))


def test_reconstruct_trajectory_lengths():
    velocities = [np.ones(1)] * 4
    assert len(reconstruct_trajectory(np.zeros(1), velocities, IntegratorConfig(Scheme.STORMER_VERLET, 0.1))) == 5
    q = reconstruct_trajectory(np.zeros(1), velocities, IntegratorConfig(Scheme.MIDPOINT, 0.1))
    assert len(q) == 4
    assert q[-1][0] == pytest.approx(0.3)
