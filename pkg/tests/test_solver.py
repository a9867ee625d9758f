import types

import numpy as np
import pytest
import scipy.sparse as sp

from bsdib.io import write_surface_csv
from bsdib.kinetics import ModelParameters
from bsdib.mesh import build_uniform_mesh
from bsdib.presets import PRESETS
from bsdib.solver import (
    BSDIB_3D,
    DIB_2D,
    DivergenceError,
    FactorizationError,
    IncrementSeries,
    SimulationState,
    TimeSteppingConfig,
    imex_step,
    initial_state,
    pattern_indicators,
    prepare_systems,
    run_simulation,
    steady_state_diagnostics,
)
from bsdib.vem import assemble_global

D3 = PRESETS["D3"].parameters()


def toy_ops(m_omega=1.0, m_gamma=1.0):
    z = sp.csr_matrix((1, 1))
    return types.SimpleNamespace(
        M_omega=np.array([m_omega]), A_omega=z, M_gamma=np.array([m_gamma]), A_gamma=z, n_omega=1, n_gamma=1
    )


def equilibrium_state(ops, p):
    return SimulationState(np.zeros(ops.n_omega), np.zeros(ops.n_omega), np.zeros(ops.n_gamma), np.full(ops.n_gamma, p.alpha))


def test_config():
    assert TimeSteppingConfig(tau=2e-3, T=50).n_steps == 25000
    assert TimeSteppingConfig(tau=5e-3, T=200).n_steps == 40000
    assert TimeSteppingConfig(tau=0.3, T=1).n_steps == 4
    assert TimeSteppingConfig(tau=1e-3, T=1).snapshot_stride == 10
    with pytest.raises(ValueError):
        TimeSteppingConfig(tau=0, T=1)
    with pytest.raises(ValueError):
        TimeSteppingConfig(tau=1, T=1, increment_norm="L1")


def test_toy_systems_are_identity():
    s = prepare_systems(toy_ops(), D3, 0.1)
    for solver in (s.b, s.q, s.eta, s.theta):
        assert solver.solve(np.array([3.5]))[0] == 3.5


def test_factorization_and_solve_consistency(uniform2):
    ops = assemble_global(uniform2)
    p = D3.replace(d_omega=2.0)
    s = prepare_systems(ops, p, 0.05)
    rng = np.random.default_rng(5)
    for solver, M, A, d in ((s.b, ops.M_omega, ops.A_omega, 1.0), (s.q, ops.M_omega, ops.A_omega, 2.0),
                            (s.eta, ops.M_gamma, ops.A_gamma, 1.0), (s.theta, ops.M_gamma, ops.A_gamma, p.d_gamma)):
        K = sp.diags(M) + 0.05 * d * A
        y = rng.normal(size=len(M))
        x = solver.solve(K @ y)
        assert np.abs(x - y).max() <= 1e-12 * np.abs(y).max()


def test_factorization_rejects_indefinite():
    with pytest.raises(FactorizationError):
        prepare_systems(toy_ops(m_gamma=-1.0), D3, 0.1)
    ops = assemble_global(build_uniform_mesh(1.0, 2))
    bad = types.SimpleNamespace(**{**ops.__dict__, "M_gamma": -ops.M_gamma})
    with pytest.raises(FactorizationError):
        prepare_systems(bad, D3, 1e-3)


def test_equilibrium_invariance(small_mesh, small_ops):
    for name in ("D3", "T1"):
        p = PRESETS[name].parameters()
        s = prepare_systems(small_ops, p, PRESETS[name].tau)
        state = start = equilibrium_state(small_ops, p)
        for _ in range(300):
            state = imex_step(state, s, small_ops, p)
        for a, b in ((state.bt, start.bt), (state.qt, start.qt), (state.eta, start.eta), (state.theta, start.theta)):
            assert np.abs(a - b).max() <= 1e-13


def test_zero_noise_increments(small_mesh, small_ops):
    cfg = TimeSteppingConfig(tau=2e-3, T=0.4, noise_eta=0.0, noise_theta=0.0)
    r = run_simulation(small_mesh, D3, cfg, ops=small_ops)
    assert np.all(r.increments.values <= 1e-13)
    d = steady_state_diagnostics(r.increments)
    assert d["final"] <= 1e-13


def test_decoupled_decay():
    p = ModelParameters(B=66, C=3, k_b=2.0)
    ops = toy_ops(m_omega=0.7)
    tau = 0.01
    s = prepare_systems(ops, p, tau)
    state = SimulationState(np.array([0.3]), np.array([0.0]), np.array([0.0]), np.array([p.alpha]))
    bs = [state.bt[0]]
    for n in range(1, 51):
        state = imex_step(state, s, ops, p)
        bs.append(state.bt[0])
        assert np.isclose(state.bt[0], 0.3 * (1 - tau * p.k_b) ** n, rtol=1e-13)
    inc = np.abs(np.diff(bs))
    np.testing.assert_allclose(inc[1:] / inc[:-1], 1 - tau * p.k_b, rtol=1e-10)
    d = steady_state_diagnostics(IncrementSeries(inc, tau * np.arange(1, 51)))
    assert d["monotone_nonincreasing"]
    assert np.isclose(d["median_ratio"], 1 - tau * p.k_b)


def test_surface_load_sign(unit_cube):
    ops = assemble_global(unit_cube)
    p = ModelParameters(B=66, C=3, psi_eta=0.5, psi_theta=0.5)
    s = prepare_systems(ops, p, 0.01)
    delta = 0.05
    state = SimulationState(np.zeros(4), np.zeros(4), np.zeros(4), np.full(4, p.alpha - delta))
    # eta = 0 and constant theta: f3 = rho B delta > 0 at every surface node
    new = imex_step(state, s, ops, p)
    assert np.all(new.bt[: ops.n_gamma] < 0)


def test_decoupling_2d_3d(small_mesh, small_ops):
    p = D3.replace(psi_eta=0.0, psi_theta=0.0)
    cfg = TimeSteppingConfig(tau=2e-3, T=1.0, seed=11)
    traj = {}
    for mode in (BSDIB_3D, DIB_2D):
        rows = []
        run_simulation(small_mesh, p, cfg, mode, ops=small_ops, progress=lambda st: rows.append(st.eta.copy()))
        traj[mode] = np.array(rows)
    assert traj[BSDIB_3D].shape == (500, small_ops.n_gamma)
    assert np.abs(traj[BSDIB_3D] - traj[DIB_2D]).max() <= 1e-10


def test_bulk_heat_energy_decreases(small_mesh, small_ops):
    p = D3.replace(psi_eta=0.0, psi_theta=0.0)
    s = prepare_systems(small_ops, p, 0.05)
    rng = np.random.default_rng(2)
    state = equilibrium_state(small_ops, p)
    # q stays at equilibrium, so eta = 0 and theta = alpha persist and the bulk is pure heat decay
    state.bt = rng.normal(size=small_ops.n_omega)
    A = small_ops.A_omega
    energy = [0.5 * state.bt @ (A @ state.bt)]
    for _ in range(40):
        state = imex_step(state, s, small_ops, p)
        energy.append(0.5 * state.bt @ (A @ state.bt))
    assert np.all(np.diff(energy) <= 1e-12 * energy[0])


def test_determinism(small_mesh, small_ops, tmp_path):
    cfg = TimeSteppingConfig(tau=2e-3, T=0.2, seed=4)
    xy = small_mesh.vertices[: small_mesh.n_gamma, :2]
    files = []
    for k in range(2):
        r = run_simulation(small_mesh, D3, cfg, ops=small_ops)
        path = tmp_path / f"run{k}.csv"
        write_surface_csv(path, xy, r.eta, r.theta)
        files.append(path.read_bytes())
    assert files[0] == files[1]


def test_initial_state_ranges(small_ops):
    cfg = TimeSteppingConfig(tau=1e-3, T=1, seed=9)
    st = initial_state(small_ops, D3, cfg)
    assert np.all((st.eta >= 0) & (st.eta <= 1e-2))
    assert np.all(np.abs(st.theta - D3.alpha) <= 1e-2)
    assert np.all(st.bt == 0) and np.all(st.qt == 0)
    assert len(st.bt) == small_ops.n_omega
    st2 = initial_state(small_ops, D3, cfg, DIB_2D)
    np.testing.assert_array_equal(st.eta, st2.eta)
    assert len(st2.bt) == 0


def test_divergence_is_reported(small_ops):
    s = prepare_systems(small_ops, D3, 2e-3)
    st = equilibrium_state(small_ops, D3)
    st.eta[3] = 1e120
    with np.errstate(all="ignore"), pytest.raises(DivergenceError) as info:
        imex_step(st, s, small_ops, D3)
    assert info.value.step == 1


def test_growth_warns(small_mesh, small_ops):
    # kinetically unstable equilibrium: the seeded noise grows
    cfg = TimeSteppingConfig(tau=2e-3, T=1.0, seed=1)
    with pytest.warns(RuntimeWarning, match="possible divergence"):
        run_simulation(small_mesh, ModelParameters(B=10, C=1), cfg, ops=small_ops)


def test_bulk_fields(small_mesh, small_ops):
    r = run_simulation(small_mesh, D3, TimeSteppingConfig(tau=2e-3, T=0.01), ops=small_ops)
    b, q = r.bulk_fields()
    assert len(b) == small_mesh.n_vertices
    top = small_ops.dirichlet_dofs
    assert np.all(b[top] == D3.b0) and np.all(q[top] == D3.q0)
    r2 = run_simulation(small_mesh, D3, TimeSteppingConfig(tau=2e-3, T=0.01), DIB_2D, ops=small_ops)
    assert r2.bulk_fields() == (None, None)


def test_pattern_indicators():
    ind = pattern_indicators(np.full(10, 2.5))
    assert ind["mean"] == 2.5 and ind["std"] == 0
    board = np.array([(-1.0) ** (i + j) for i in range(8) for j in range(8)])
    ind = pattern_indicators(board, np.ones(64))
    assert abs(ind["mean"]) < 1e-15 and np.isclose(ind["std"], 1.0)
    ind = pattern_indicators(np.full(5, D3.alpha), np.arange(1.0, 6.0))
    assert np.isclose(ind["mass_weighted_mean"], D3.alpha)


def test_diagnostics_errors():
    with pytest.raises(ValueError):
        steady_state_diagnostics(IncrementSeries(np.array([]), np.array([])))
    d = steady_state_diagnostics(IncrementSeries(np.zeros(5), np.arange(5.0)))
    assert d["final"] == 0 and d["settled"]
