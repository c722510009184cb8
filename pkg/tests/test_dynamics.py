import numpy as np
import pytest
from scipy.linalg import expm

from plexsim.dynamics import (PopulationTrace, SolverError, interaction_rhs, propagate_lindblad,
                              propagate_schrodinger, simulate, to_interaction_picture)
from plexsim.mode_table import ConfigError, detunings, make_config
from plexsim.model import build_hamiltonian, build_lindblad


def cfg(lossless=False, samples=401):
    return make_config(2.0, 1.0, [2.1, 1.7, 2.6], kappas=[0.05, 0.1, 0.2], g_per_debye=[0.03, 0.05, 0.02],
                       lossless=lossless, t_max=100.0, samples=samples)


def test_schrodinger_matches_matrix_exponential():
    c = cfg()
    h = build_hamiltonian(c)
    traj = propagate_schrodinger(h, c.times)
    m = h.matrix()
    for i in (0, 57, 200, 400):
        psi = expm(-1j * m * c.times[i])[:, 0]
        np.testing.assert_allclose(np.concatenate([[traj.c0[i]], traj.c_modes[i]]), psi, atol=1e-8)


def test_norm_conserved_without_loss_and_decays_with_loss():
    lossless = propagate_schrodinger(build_hamiltonian(cfg(True)), cfg().times)
    assert np.max(np.abs(lossless.norm - 1)) < 1e-8
    lossy = propagate_schrodinger(build_hamiltonian(cfg()), cfg().times)
    assert np.all(np.diff(lossy.norm) <= 1e-12)
    assert lossy.norm[-1] < 0.99


def test_interaction_picture_substitution():
    # c_xi = b_xi exp(-i Delta_xi t) must solve the interaction-picture equations
    rng = np.random.default_rng(7)
    for _ in range(5):
        n = rng.integers(1, 5)
        c = make_config(1.0, 1.0, 1.0 - rng.uniform(-0.5, 0.5, n), g_per_debye=rng.uniform(0.01, 0.1, n),
                        lossless=True, t_max=40.0, samples=4001)
        traj = to_interaction_picture(propagate_schrodinger(build_hamiltonian(c), c.times, 1e-12), detunings(c))
        dt = c.times[1] - c.times[0]
        for i in (500, 2000, 3500):
            dc0 = (traj.c0[i + 1] - traj.c0[i - 1]) / (2 * dt)
            dcm = (traj.c_modes[i + 1] - traj.c_modes[i - 1]) / (2 * dt)
            r0, rm = interaction_rhs(c.times[i], traj.c0[i], traj.c_modes[i], c.couplings, detunings(c))
            assert abs(dc0 - r0) < 1e-6
            np.testing.assert_allclose(dcm, rm, atol=1e-6)


def test_lindblad_agrees_with_effective_hamiltonian():
    c = cfg()
    res = propagate_lindblad(build_lindblad(c), c.times)
    ref = simulate(c, "schrodinger")
    assert np.max(np.abs(res.population.values - ref.values)) < 1e-8
    assert res.trace_drift < 1e-8
    # ground-state population accounts for what leaked out
    sink = res.states[:, -1, -1].real
    norm = propagate_schrodinger(build_hamiltonian(c), c.times).norm
    np.testing.assert_allclose(sink, 1 - norm, atol=1e-8)


def test_three_paths_agree_lossless():
    c = cfg(True)
    a = simulate(c, "analytic").values
    assert np.max(np.abs(simulate(c, "schrodinger").values - a)) < 1e-8
    assert np.max(np.abs(simulate(c, "lindblad").values - a)) < 1e-8


def test_analytic_path_rejects_loss():
    with pytest.raises(ConfigError, match="analytic path requires lossless"):
        simulate(cfg(), "analytic")
    with pytest.raises(ValueError):
        simulate(cfg(), "euler")


def test_tolerance_bounds():
    with pytest.raises(ValueError):
        simulate(cfg(), "schrodinger", tol=1e-2)


def test_solver_error_reports_time():
    err = SolverError("boom", 12.5, 0.1)
    assert "12.5" in str(err) and err.t_reached == 12.5


def test_trace_csv_round_trip(tmp_path):
    tr = simulate(cfg(True), "analytic")
    path = tmp_path / "n.csv"
    tr.write_csv(path)
    assert path.read_text().splitlines()[0] == "t_fs,population"
    back = PopulationTrace.read_csv(path)
    np.testing.assert_array_equal(back.values, tr.values)
    np.testing.assert_array_equal(back.times, tr.times)
    assert back.is_uniform()


def test_trace_rejects_out_of_range():
    with pytest.raises(ValueError):
        PopulationTrace(np.arange(3.0), np.array([1.0, 1.5, 0.2]))


def test_initial_condition_and_metadata():
    tr = simulate(cfg(), "schrodinger")
    assert tr.values[0] == 1.0
    assert tr.metadata["integrator"] == "DOP853"
    assert tr.metadata["config_hash"] == cfg().config_hash()


def test_synthetic_ladder_paths_agree():
    from plexsim.mode_table import synthetic_ladder

    ladder = synthetic_ladder()
    lossless = ladder.with_loss(True)
    a = simulate(lossless, "analytic").values
    assert np.max(np.abs(simulate(lossless, "schrodinger").values - a)) <= 1e-6
    lossy = simulate(ladder, "schrodinger").values
    assert np.max(np.abs(simulate(ladder, "lindblad").values - lossy)) <= 1e-6
