import pytest

from electron_force_budget.core_physics import derive_modes
from electron_force_budget.langevin_oracle import SimConfig
from electron_force_budget.models import design_config as load_design_config


@pytest.fixture(scope="session")
def design_config():
    return load_design_config()


@pytest.fixture(scope="session")
def design_modes(design_config):
    return derive_modes(design_config.trap)


@pytest.fixture(scope="session")
def toy_sim_config():
    """Red-detuned toy system: Ω_k/Ω_z = 1.25, κ/Ω_z = 0.1, hot mechanics."""
    return SimConfig()
