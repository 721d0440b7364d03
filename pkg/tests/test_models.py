import math

import pytest

from electron_force_budget.errors import ConfigError
from electron_force_budget.models import (
    CONFIG_DIR,
    EPS0_SI,
    CavityConfig,
    SystemConfig,
    TrapConfig,
    load_config,
    load_ini,
    validate_config,
)


def test_design_config_values(design_config):
    """Shipped config carries the design point."""
    trap = design_config.trap
    assert trap.V0 == 19.3
    assert trap.B0 == 0.5
    assert trap.z0 == 50e-6
    assert trap.d == pytest.approx(50e-6, rel=1e-12)

    cavity = design_config.cavity
    assert cavity.omega_k == pytest.approx(2 * math.pi * 5.5e9, rel=1e-12)
    assert cavity.Q_int == 1e5
    assert cavity.Q_ext == 1e3
    assert cavity.omega_in is None
    assert cavity.drive == cavity.omega_k
    assert cavity.theta_lo == pytest.approx(math.pi / 2)
    assert cavity.kappa_in == pytest.approx(1.727876e7, rel=1e-6)
    assert cavity.kappa_add == pytest.approx(1.727876e5, rel=1e-6)

    assert design_config.antenna.length_l == "auto"
    assert design_config.antenna.width_w == 0.05
    assert design_config.electrode.eps_dielectric == pytest.approx(2.0 * EPS0_SI)
    assert design_config.magnet.alpha_decay == pytest.approx((2 * math.pi, 2 * math.pi * 1e6))
    assert design_config.tls.t_exp == 1e5
    for temperature in (trap.T_trap, cavity.T_cav, design_config.magnet.T_mag):
        assert temperature == 4.0


def test_ini_and_json_configs_agree(design_config):
    assert load_config(CONFIG_DIR / "design_point.json") == design_config


def test_json_round_trip(design_config):
    assert SystemConfig.model_validate_json(design_config.to_json()) == design_config


def test_unknown_key_names_path():
    with pytest.raises(ConfigError) as excinfo:
        validate_config({"trap": {"V0": 19.3, "bogus": 1.0}})
    assert excinfo.value.path == "trap.bogus"
    assert "trap.bogus" in str(excinfo.value)


def test_invalid_value_names_path():
    with pytest.raises(ConfigError) as excinfo:
        validate_config({"cavity": {"dims": [0.1, -0.2, 0.3]}})
    assert excinfo.value.path == "cavity.dims"


def test_temperature_shorthand_and_override():
    config = validate_config({"temperature_k": 0.5, "trap": {"T_trap": 2.0}})
    assert config.trap.T_trap == 2.0
    assert config.cavity.T_cav == 0.5
    assert config.magnet.T_mag == 0.5

    hot = config.with_temperature(300.0)
    assert (hot.trap.T_trap, hot.cavity.T_cav, hot.magnet.T_mag) == (300.0, 300.0, 300.0)


def test_replace_and_get(design_config):
    changed = design_config.replace("trap.V0", 30.0)
    assert changed.trap.V0 == 30.0
    assert design_config.trap.V0 == 19.3

    retuned = design_config.replace("cavity.f_k_hz", 6e9)
    assert retuned.get("cavity.f_k_hz") == pytest.approx(6e9, rel=1e-12)

    with pytest.raises(ConfigError):
        design_config.replace("trap.nope", 1.0)
    with pytest.raises(ConfigError):
        design_config.get("nowhere.V0")


def test_trap_characteristic_size():
    trap = TrapConfig(d=0.5e-3)
    assert trap.z0 == 0.5e-3
    assert trap.d == pytest.approx(0.5e-3, rel=1e-12)
    with pytest.raises(ValueError):
        TrapConfig(d=50e-6, z0=200e-6)


def test_cavity_from_rates():
    cavity = CavityConfig.from_rates(1.25, 0.1, 0.0)
    assert cavity.kappa_in == pytest.approx(0.1)
    assert cavity.kappa_add == 0.0
    assert math.isinf(cavity.Q_int)


def test_ini_rejects_unknown_bath_key(tmp_path):
    path = tmp_path / "bad.cfg"
    path.write_text("[baths]\ntemperature_k = 4\nhumidity = 0.3\n")
    with pytest.raises(ConfigError) as excinfo:
        load_ini(path)
    assert excinfo.value.path == "baths.humidity"


def test_missing_file(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "absent.cfg")
    with pytest.raises(ConfigError):
        load_config(tmp_path / "absent.json")
