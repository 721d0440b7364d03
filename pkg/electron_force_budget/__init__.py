"""Force-noise budget of a trapped electron read out through an antenna-coupled cavity."""

from .budget_engine import NoiseBudget, assemble_budget, find_minimum, make_grid, resonance_grid, voltage_sweep
from .design_optimizer import ParamSpace, ParamSpec, optimize, sensitivity_table
from .errors import NoiseBudgetError
from .models import SystemConfig, design_config, load_config

__version__ = "0.1.0"

__all__ = [
    "NoiseBudget",
    "NoiseBudgetError",
    "ParamSpace",
    "ParamSpec",
    "SystemConfig",
    "assemble_budget",
    "design_config",
    "find_minimum",
    "load_config",
    "make_grid",
    "optimize",
    "resonance_grid",
    "sensitivity_table",
    "voltage_sweep",
]
