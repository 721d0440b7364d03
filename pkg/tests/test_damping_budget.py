import numpy as np
import pytest

from electron_force_budget.core_physics import coupling_strength, derive_modes, thermal_occupation
from electron_force_budget.damping_budget import (
    compose_damping,
    dephasing_rates,
    dephasing_scan,
    gamma_antenna,
    gamma_dephasing,
    gamma_dephasing_approx,
    gamma_larmor_cavity,
    kerr_coefficients,
    s_number,
    s_number_cyclotron,
)
from electron_force_budget.errors import DomainError, TrapUnstable
from electron_force_budget.models import CavityConfig, NonIdealityConfig, TrapConfig


@pytest.fixture
def small_trap():
    return TrapConfig(V0=19.0, B0=0.5, d=50e-6, T_trap=4.0)


def test_kerr_coefficients_scale(small_trap):
    modes = derive_modes(small_trap)
    kerr = kerr_coefficients(modes, small_trap, NonIdealityConfig(phi04=1.0))
    assert kerr.omega_zz == pytest.approx(1.5 * 643.8, rel=2e-3)
    assert kerr.d_omega_z == pytest.approx(2.0 * kerr.omega_zz, rel=1e-12)
    assert kerr.omega_pz == 0.0


def test_magnetic_bottle_splits_radial_shifts(small_trap):
    modes = derive_modes(small_trap)
    kerr = kerr_coefficients(modes, small_trap, NonIdealityConfig(b20=1.0))
    # B-only terms: Ω_-- − Ω_++ = 2𝒞, Ω_++ + Ω_-- = 2ℬ
    assert kerr.omega_mm - kerr.omega_pp == pytest.approx(2 * 1.14496e5, rel=2e-3)
    assert kerr.omega_mm + kerr.omega_pp == pytest.approx(2 * 1.4154e5, rel=2e-3)


def test_ideal_trap_has_no_dephasing(small_trap):
    modes = derive_modes(small_trap)
    kerr = kerr_coefficients(modes, small_trap, NonIdealityConfig())
    assert all(value == 0.0 for value in kerr.to_dict().values())
    assert gamma_dephasing(modes, kerr, 4.0) == 0.0


def test_kerr_requires_stable_trap():
    trap = TrapConfig(V0=60.0, d=50e-6)
    modes = derive_modes(trap, check=False)
    with pytest.raises(TrapUnstable):
        kerr_coefficients(modes, trap, NonIdealityConfig())


def test_dephasing_approximation_at_low_occupation(small_trap):
    modes = derive_modes(small_trap)
    kerr = kerr_coefficients(modes, small_trap, NonIdealityConfig(phi22=1.9, b02=0.05))
    T = 0.1
    assert thermal_occupation(modes.omega_plus, T) < 0.01
    full = gamma_dephasing(modes, kerr, T)
    assert full > 0
    assert gamma_dephasing_approx(modes, kerr, T) == pytest.approx(full, rel=1e-2)


def test_dephasing_rates_contain_cyclotron_channel(small_trap):
    modes = derive_modes(small_trap)
    kerr = kerr_coefficients(modes, small_trap, NonIdealityConfig(phi22=1.9, b02=0.05, phi40=0.3, b20=0.01))
    rates = dephasing_rates(modes, kerr, 4.0)
    assert set(rates) == {"z<-plus", "plus<-z", "z<-minus", "minus<-z", "plus<-minus", "minus<-plus"}
    assert rates["z<-plus"] == pytest.approx(gamma_dephasing(modes, kerr, 4.0), rel=1e-12)
    assert all(value >= 0 for value in rates.values())


def test_number_spectrum_peaks_at_twice_mode_frequency():
    omega = np.linspace(1.0, 3.0, 2001)
    spectrum = s_number(omega, 2.0, 0.01, 1.0)
    assert omega[np.argmax(spectrum)] == pytest.approx(2.0)
    assert s_number_cyclotron(2.0, 2.0, 0.01, 1.0) == pytest.approx(2 * 2.0 * 3.0 / 0.01)
    with pytest.raises(DomainError):
        s_number(0.0, 1.0, 0.01, 1.0)
    with pytest.raises(DomainError):
        s_number(1.0, 1.0, 0.0, 1.0)


def test_dephasing_scan_range():
    sizes = np.geomspace(50e-6, 0.5e-3, 4)
    fractions = np.linspace(0.1, 1.0, 4)
    table = dephasing_scan(list(sizes), list(fractions))
    assert table.shape == (4, 4)
    assert np.all(table >= 1e-20)
    assert np.all(table <= 1e-10)
    # larger non-idealities dephase more
    assert np.all(np.diff(table, axis=1) > 0)


def test_compose_damping_design_point(design_config):
    G = coupling_strength(design_config.trap, design_config.cavity, design_config.antenna)
    damping = compose_damping(
        design_config.trap, design_config.cavity, design_config.antenna, design_config.nonideal, G, 4.0
    )
    assert damping.gamma_ba == pytest.approx(0.156166, rel=1e-2)
    assert damping.gamma_antenna == pytest.approx(0.159175, rel=1e-2)
    assert 1e-8 < damping.gamma_larmor < 1e-6
    assert damping.gamma_dephase == 0.0
    assert damping.gamma_eff == pytest.approx(damping.gamma_intrinsic + damping.gamma_ba, rel=1e-15)


def test_damping_components_match_helpers(design_config, design_modes):
    damping = compose_damping(
        design_config.trap, design_config.cavity, design_config.antenna, design_config.nonideal, 0.0, 4.0
    )
    assert damping.gamma_ba == 0.0
    assert damping.gamma_larmor == gamma_larmor_cavity(design_modes, design_config.cavity)
    assert damping.gamma_antenna == gamma_antenna(design_config.trap, design_config.antenna, design_modes)


def test_wider_antenna_damps_less(design_config, design_modes):
    narrow = gamma_antenna(design_config.trap, design_config.antenna.model_copy(update={"width_w": 0.01}), design_modes)
    wide = gamma_antenna(design_config.trap, design_config.antenna, design_modes)
    assert narrow / wide == pytest.approx(5.0)


def test_antenna_damping_scales_with_geometry(design_config, design_modes):
    """γ_A ∝ ρ·l/(A_a·z0²) under random rescalings."""
    trap = design_config.trap
    antenna = design_config.antenna.model_copy(update={"length_l": 0.025})
    base = gamma_antenna(trap, antenna, design_modes)
    rng = np.random.default_rng(5)
    for r, l, w, t, z in rng.uniform(0.2, 2.0, size=(20, 5)):
        scaled_antenna = antenna.model_copy(
            update={
                "resistivity": r * antenna.resistivity,
                "length_l": l * 0.025,
                "width_w": w * antenna.width_w,
                "thickness_tm": t * antenna.thickness_tm,
            }
        )
        scaled_trap = trap.model_copy(update={"z0": z * trap.z0})
        ratio = gamma_antenna(scaled_trap, scaled_antenna, design_modes) / base
        assert ratio == pytest.approx(r * l / (w * t * z ** 2), rel=1e-12)


def test_damping_channels_are_non_negative(design_config):
    rng = np.random.default_rng(17)
    for _ in range(40):
        V0 = rng.uniform(5.0, 50.0)
        B0 = rng.uniform(0.5, 2.0)
        trap = TrapConfig(V0=V0, B0=B0, d=rng.uniform(50e-6, 500e-6), T_trap=rng.uniform(0.0, 10.0))
        cavity = CavityConfig(
            omega_k=2 * np.pi * rng.uniform(4e9, 8e9),
            Q_int=10 ** rng.uniform(3, 6),
            Q_ext=10 ** rng.uniform(2, 4),
        )
        nonideal = NonIdealityConfig(
            phi40=rng.uniform(-0.1, 0.1) * V0,
            phi22=rng.uniform(-0.1, 0.1) * V0,
            phi04=rng.uniform(-0.1, 0.1) * V0,
            b20=rng.uniform(-0.1, 0.1) * B0,
            b02=rng.uniform(-0.1, 0.1) * B0,
        )
        G = coupling_strength(trap, cavity, design_config.antenna)
        damping = compose_damping(trap, cavity, design_config.antenna, nonideal, G, trap.T_trap)
        assert damping.gamma_larmor >= 0
        assert damping.gamma_antenna >= 0
        assert damping.gamma_ba >= 0
        assert damping.gamma_dephase >= 0
        assert damping.gamma_eff == pytest.approx(
            damping.gamma_larmor + damping.gamma_antenna + damping.gamma_ba + damping.gamma_dephase, rel=1e-12
        )


@pytest.mark.parametrize("sign", [1.0, -1.0])
def test_dephasing_grows_with_each_non_ideality(small_trap, sign):
    modes = derive_modes(small_trap)
    magnitudes = np.linspace(0.0, 2.0, 6)
    for fixed in (0.0, 0.02):
        by_phi22 = [
            gamma_dephasing(
                modes, kerr_coefficients(modes, small_trap, NonIdealityConfig(phi22=sign * p, b02=sign * fixed)), 4.0
            )
            for p in magnitudes
        ]
        by_b02 = [
            gamma_dephasing(
                modes,
                kerr_coefficients(modes, small_trap, NonIdealityConfig(phi22=sign * 10 * fixed, b02=sign * 0.05 * b)),
                4.0,
            )
            for b in magnitudes
        ]
        assert np.all(np.diff(by_phi22) >= 0)
        assert np.all(np.diff(by_b02) >= 0)
        assert by_phi22[-1] > by_phi22[0]
        assert by_b02[-1] > by_b02[0]


@pytest.mark.parametrize(
    "V0, B0, d, T",
    [(19.0, 0.5, 50e-6, 0.1), (19.0, 0.5, 50e-6, 0.3), (10.0, 1.0, 100e-6, 0.2), (40.0, 2.0, 200e-6, 0.5)],
)
def test_dephasing_approximation_across_operating_points(V0, B0, d, T):
    trap = TrapConfig(V0=V0, B0=B0, d=d, T_trap=T)
    modes = derive_modes(trap)
    kerr = kerr_coefficients(modes, trap, NonIdealityConfig(phi22=0.1 * V0, b02=0.1 * B0))
    assert thermal_occupation(modes.omega_plus, T) < 0.01
    full = gamma_dephasing(modes, kerr, T)
    assert full > 0
    assert gamma_dephasing_approx(modes, kerr, T) == pytest.approx(full, rel=1e-2)
