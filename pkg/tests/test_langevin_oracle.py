import json
import math

import numpy as np
import pytest
from pydantic import ValidationError

from electron_force_budget.errors import GridMismatch, StepTooLarge
from electron_force_budget.langevin_oracle import (
    LorentzFit,
    SimConfig,
    SimResult,
    analytic_mechanics,
    analytic_output_psd,
    analytic_z_psd,
    compare_to_analytic,
    discretize,
    estimate_psd,
    fit_lorentzian,
    report_json,
    simulate,
)

QUICK = dict(gamma=0.1, nperseg=8192, n_segments=4, n_trajectories=8)


def _dummy_result(config):
    omega = np.linspace(0.0, 2.0, 11)
    flat = np.ones_like(omega)
    fit = LorentzFit(1.0, 0.01, 1e-4, 1e-4, 1.0, 0.0)
    return SimResult(config, omega, flat, flat, flat, flat, fit, 1.0, 0.1)


@pytest.mark.parametrize(
    "update",
    [{"dt": 0.0}, {"gamma": -0.1}, {"theta": 2 * math.pi}, {"n_trajectories": 4}, {"nperseg": 1}],
)
def test_sim_config_validation(update):
    with pytest.raises(ValidationError):
        SimConfig(**update)


def test_sim_config_rejects_unknown_fields():
    with pytest.raises(ValidationError):
        SimConfig(hbar=1.0)


def test_step_size_guard():
    with pytest.raises(StepTooLarge):
        simulate(SimConfig(dt=0.1))
    assert SimConfig(frame="rotating").fastest_scale() == 1.0


def test_discretization_is_exact_rotation():
    sim = SimConfig(gamma=0.0, G=0.0, T_mech=0.0)
    phi, q_d = discretize(sim)
    assert phi[0, 0] == pytest.approx(math.cos(sim.dt), rel=1e-12)
    assert phi[0, 1] == pytest.approx(math.sin(sim.dt), rel=1e-12)
    np.testing.assert_allclose(q_d, q_d.T, atol=0)
    # input-noise integrals accumulate port * dt per step
    assert q_d[4, 4] == pytest.approx(0.25 * sim.dt, rel=1e-12)
    assert np.all(np.linalg.eigvalsh(q_d) >= -1e-15)


def test_discretized_mechanical_noise():
    sim = SimConfig(G=0.0)
    _, q_d = discretize(sim)
    expected = 2.0 * sim.gamma * sim.omega_z * (sim.n_mech + 0.5) * sim.dt
    assert q_d[1, 1] == pytest.approx(expected, rel=1e-2)


def test_white_noise_level():
    """Welch estimate of white noise sits at σ²·dt."""
    sigma, dt = 2.0, 0.1
    x = sigma * np.random.default_rng(0).standard_normal(2 ** 16)
    omega, psd = estimate_psd(x, dt, 1024)
    assert omega[1] == pytest.approx(2 * math.pi / (1024 * dt))
    assert psd[1:-1].mean() == pytest.approx(sigma ** 2 * dt, rel=3e-2)


def test_fit_lorentzian_recovers_parameters():
    omega = np.linspace(0.9, 1.1, 2001)
    psd = 3.0 * 0.005 ** 2 / ((omega - 1.001) ** 2 + 0.005 ** 2) + 0.2
    fit = fit_lorentzian(omega, psd)
    assert fit.center == pytest.approx(1.001, abs=1e-6)
    assert fit.linewidth == pytest.approx(0.01, rel=1e-4)
    assert fit.offset == pytest.approx(0.2, rel=1e-3)


def test_rotating_frame_is_not_comparable(toy_sim_config):
    rotating = _dummy_result(toy_sim_config.model_copy(update={"frame": "rotating"}))
    with pytest.raises(GridMismatch):
        compare_to_analytic(rotating)


def test_coarse_grid_is_not_comparable(toy_sim_config):
    with pytest.raises(GridMismatch):
        compare_to_analytic(_dummy_result(toy_sim_config))


def test_analytic_flat_output_without_coupling():
    sim = SimConfig(G=0.0)
    omega = np.linspace(0.1, 3.0, 50)
    np.testing.assert_allclose(analytic_output_psd(sim, omega), 0.5, rtol=1e-12)


def test_analytic_displacement_without_coupling():
    sim = SimConfig(G=0.0, gamma=0.05)
    omega = np.linspace(0.8, 1.2, 41)
    bare = 1.0 / ((1.0 - omega ** 2) ** 2 + (0.05 * omega) ** 2)
    expected = bare * 2.0 * 0.05 * (sim.n_mech + 0.5)
    np.testing.assert_allclose(analytic_z_psd(sim, omega), expected, rtol=1e-12)


def test_analytic_mechanics_of_toy_system(toy_sim_config):
    center, linewidth = analytic_mechanics(toy_sim_config)
    assert center - 1.0 == pytest.approx(-0.005363, rel=1e-2)
    assert linewidth - 0.01 == pytest.approx(0.001898, rel=1e-2)


@pytest.mark.slow
def test_seeded_runs_repeat():
    first = simulate(SimConfig(seed=5, **QUICK), n_jobs=1)
    second = simulate(SimConfig(seed=5, **QUICK), n_jobs=1)
    np.testing.assert_array_equal(first.psd_q, second.psd_q)
    np.testing.assert_array_equal(first.psd_z, second.psd_z)
    other = simulate(SimConfig(seed=6, **QUICK), n_jobs=1)
    assert not np.array_equal(first.psd_q, other.psd_q)


@pytest.fixture(scope="module")
def uncoupled_run():
    sim = SimConfig(G=0.0, gamma=0.05, nperseg=65536, n_trajectories=16)
    return simulate(sim, n_jobs=1)


@pytest.mark.slow
def test_uncoupled_oscillator_equipartition(uncoupled_run):
    expected = uncoupled_run.config.n_mech + 0.5
    assert uncoupled_run.z_variance == pytest.approx(expected, rel=5e-2)
    assert uncoupled_run.linewidth == pytest.approx(0.05, rel=0.1)


@pytest.mark.slow
def test_uncoupled_displacement_matches_analytic(uncoupled_run):
    band = np.abs(uncoupled_run.omega - 1.0) <= 0.025
    expected = analytic_z_psd(uncoupled_run.config, uncoupled_run.omega[band])
    assert uncoupled_run.psd_z[band].mean() == pytest.approx(expected.mean(), rel=5e-2)


@pytest.mark.slow
def test_uncoupled_output_is_vacuum(uncoupled_run):
    band = (uncoupled_run.omega >= 0.5) & (uncoupled_run.omega <= 2.0)
    assert uncoupled_run.psd_q[band].mean() == pytest.approx(0.5, rel=2e-2)


@pytest.fixture(scope="module")
def toy_run(toy_sim_config):
    return simulate(toy_sim_config, n_jobs=1)


@pytest.mark.slow
def test_simulated_mechanics_match_backaction(toy_run, toy_sim_config):
    center, linewidth = analytic_mechanics(toy_sim_config)
    assert toy_run.linewidth == pytest.approx(linewidth, rel=0.1)
    assert abs(toy_run.center - center) <= 3 * toy_run.fit.center_err + 2e-4


@pytest.mark.slow
def test_output_spectrum_matches_analytic(toy_run):
    report = compare_to_analytic(toy_run)
    assert report["passed"], report["max_abs_deviation"]
    assert report["n_bins"] >= 5
    assert json.loads(report_json(report))["config"]["seed"] == 0


@pytest.mark.slow
def test_mismatched_cavity_is_detected(toy_run, toy_sim_config):
    wrong = toy_sim_config.model_copy(update={"kappa_in": 2 * toy_sim_config.kappa_in})
    report = compare_to_analytic(toy_run, wrong)
    assert not report["passed"]


@pytest.mark.slow
def test_halving_the_step_leaves_statistics(toy_sim_config):
    coarse = toy_sim_config.model_copy(update={"gamma": 0.05, "nperseg": 65536, "n_trajectories": 16})
    fine = coarse.model_copy(update={"dt": 0.02, "nperseg": 131072})
    a = simulate(coarse, n_jobs=1)
    b = simulate(fine, n_jobs=1)
    spread = math.hypot(a.z_variance_err, b.z_variance_err)
    assert abs(a.z_variance - b.z_variance) <= 3 * spread
    assert a.linewidth == pytest.approx(b.linewidth, rel=0.1)
