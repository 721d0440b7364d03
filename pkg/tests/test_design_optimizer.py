import numpy as np
import pytest

from electron_force_budget.budget_engine import assemble_budget, find_minimum, resonance_grid
from electron_force_budget.core_physics import derive_modes
from electron_force_budget.design_optimizer import (
    DETUNING,
    ParamSpace,
    ParamSpec,
    budget_objective,
    optimize,
    sensitivity_table,
)
from electron_force_budget.errors import ConfigError, DomainError, IntegrationFailure, NoFeasiblePoint
from electron_force_budget.models import TWO_PI


def width_distance(config):
    return (config.antenna.width_w - 0.03) ** 2


def test_param_spec_parsing():
    assert ParamSpec.parse("cavity.Q_ext:1e3:1e4").scale == "log"
    assert ParamSpec.parse("trap.V0:15:25").scale == "linear"
    assert ParamSpec.parse("trap.V0:15:25:log").scale == "log"
    assert ParamSpec.parse("detuning:-1e9:1e9") == ParamSpec(DETUNING, -1e9, 1e9)


@pytest.mark.parametrize(
    "text",
    ["trap.V0:15", "trap.V0:a:b", "trap.V0:25:15", "trap.V0:1:2:cubic", "cavity.Q_ext:0:10:log"],
)
def test_param_spec_rejects(text):
    with pytest.raises(ConfigError):
        ParamSpec.parse(text)


def test_unit_mapping_inverts():
    for spec in (ParamSpec("trap.V0", 15.0, 25.0), ParamSpec("cavity.Q_ext", 1e3, 1e5, "log")):
        for u in (0.0, 0.3, 1.0):
            assert spec.to_unit(spec.from_unit(u)) == pytest.approx(u, abs=1e-12)
    assert ParamSpec("cavity.Q_ext", 1e3, 1e5, "log").from_unit(0.5) == pytest.approx(1e4)
    assert ParamSpec("trap.V0", 15.0, 25.0).from_unit(2.0) == 25.0


def test_space_rejects_duplicates():
    with pytest.raises(ConfigError):
        ParamSpace.from_strings(["trap.V0:15:25", "trap.V0:16:20"])
    with pytest.raises(ConfigError):
        ParamSpace(())


def test_detuning_follows_new_axial_frequency(design_config):
    space = ParamSpace.from_strings(["trap.V0:15:25", "detuning:-1e9:1e9"])
    config = space.apply(design_config, {DETUNING: -3.6e8, "trap.V0": 25.0})
    f_z = derive_modes(config.trap).omega_z / TWO_PI
    assert config.trap.V0 == 25.0
    assert config.get("cavity.f_k_hz") == pytest.approx(f_z - 3.6e8, rel=1e-12)


def test_optimize_finds_interior_minimum(design_config):
    space = ParamSpace.from_strings(["antenna.width_w:0.01:0.05"])
    result = optimize(design_config, space, width_distance, budget_evals=60, seed=3, n_jobs=1)
    assert result.best_params["antenna.width_w"] == pytest.approx(0.03, abs=1e-3)
    assert result.best_objective <= 1e-6
    assert result.best_config.antenna.width_w == result.best_params["antenna.width_w"]
    assert result.evaluations == len(result.trace)
    assert np.all(np.diff(result.running_min) <= 0)
    assert result.objective == "width_distance"


def test_optimize_is_deterministic_per_seed(design_config):
    space = ParamSpace.from_strings(["antenna.width_w:0.01:0.05", "trap.V0:15:25"])
    first = optimize(design_config, space, width_distance, budget_evals=30, seed=11, n_jobs=1)
    second = optimize(design_config, space, width_distance, budget_evals=30, seed=11, n_jobs=1)
    assert first.best_params == second.best_params
    np.testing.assert_array_equal(first.trace, second.trace)


def test_optimize_needs_a_feasible_point(design_config):
    def always_infeasible(config):
        raise DomainError("outside model validity")

    space = ParamSpace.from_strings(["trap.V0:15:25"])
    with pytest.raises(NoFeasiblePoint):
        optimize(design_config, space, always_infeasible, budget_evals=20, n_jobs=1)


def test_optimize_validates_inputs(design_config):
    space = ParamSpace.from_strings(["trap.bogus:1:2"])
    with pytest.raises(ConfigError):
        optimize(design_config, space, width_distance, n_jobs=1)
    with pytest.raises(ConfigError):
        optimize(design_config, ParamSpace.from_strings(["trap.V0:15:25"]), width_distance, budget_evals=5)


def test_widest_antenna_gives_deepest_floor(design_config):
    """Antenna damping falls with width, so the floor keeps dropping to the upper bound."""
    space = ParamSpace.from_strings(["antenna.width_w:0.01:0.05"])
    result = optimize(design_config, space, "min_floor", budget_evals=20, seed=0, n_jobs=1)
    assert 0.04 < result.best_params["antenna.width_w"] <= 0.05
    assert result.objective == "min_floor"
    floor = find_minimum(assemble_budget(design_config, resonance_grid(design_config, n=1024)))[1]
    assert floor * (1 - 1e-9) <= result.best_objective <= 1.1 * floor


def test_sensitivity_table_shape(design_config):
    space = ParamSpace.from_strings(["antenna.width_w:0.01:0.05", "trap.V0:15:25"])
    table = sensitivity_table(design_config, space, n_per_axis=3, objective=width_distance, n_jobs=1)
    assert list(table.columns) == ["param", "value", "floor"]
    assert len(table) == 6
    width_rows = table[table["param"] == "antenna.width_w"]
    assert width_rows["floor"].iloc[0] == pytest.approx(0.02 ** 2)
    v0_rows = table[table["param"] == "trap.V0"]
    np.testing.assert_allclose(v0_rows["value"], [15.0, 20.0, 25.0])
    # the width axis alone moves this objective
    assert v0_rows["floor"].nunique() == 1

    with pytest.raises(ConfigError):
        sensitivity_table(design_config, space, n_per_axis=2)


def test_budget_objective_names():
    with pytest.raises(ConfigError):
        budget_objective("max_floor")
    with pytest.raises(ConfigError):
        budget_objective("band_min")
    with pytest.raises(ConfigError):
        budget_objective("band_min", band=(7e9, 5e9))


def test_band_min_is_lowest_amplitude_in_band(design_config):
    band = (5e9, 7e9)
    value = budget_objective("band_min", band=band, points=1024)(design_config)
    budget = assemble_budget(design_config, resonance_grid(design_config, n=1024))
    points = budget.grid.points
    mask = (points >= band[0]) & (points <= band[1])
    assert value == budget.amplitude()[mask].min()
    assert value >= budget_objective("min_floor", points=1024)(design_config) * (1 - 1e-9)


def test_unit_mapping_stays_in_bounds():
    specs = (
        ParamSpec("antenna.width_w", 0.01, 0.05, "log"),
        ParamSpec("cavity.Q_ext", 1e3, 1e5, "log"),
        ParamSpec(DETUNING, -1e9, 1e9),
        ParamSpec("trap.V0", 15.0, 25.0),
    )
    rng = np.random.default_rng(2)
    for spec in specs:
        assert spec.from_unit(0.0) == spec.lower
        assert spec.from_unit(1.0) == spec.upper
        for u in rng.uniform(-0.5, 1.5, 500):
            assert spec.lower <= spec.from_unit(u) <= spec.upper


def test_numerical_failures_score_as_infeasible(design_config):
    def fragile_distance(config):
        if config.antenna.width_w > 0.04:
            raise IntegrationFailure("quadrature did not converge")
        return width_distance(config)

    space = ParamSpace.from_strings(["antenna.width_w:0.01:0.05"])
    result = optimize(design_config, space, fragile_distance, budget_evals=40, seed=1, n_jobs=1)
    assert np.isinf(result.trace[:, 1]).any()
    assert result.best_params["antenna.width_w"] <= 0.04
    assert result.best_objective <= 1e-4


def test_degenerate_space_returns_corner(design_config):
    space = ParamSpace(
        (
            ParamSpec("antenna.width_w", 0.03, 0.03 * (1 + 1e-12), "log"),
            ParamSpec("trap.V0", 20.0, 20.0 + 1e-9),
        )
    )
    result = optimize(design_config, space, width_distance, budget_evals=20, seed=0, n_jobs=1)
    for spec in space.entries:
        assert spec.lower <= result.best_params[spec.name] <= spec.upper
    assert result.best_config.antenna.width_w == pytest.approx(0.03, rel=1e-9)
    assert result.best_config.trap.V0 == pytest.approx(20.0, rel=1e-9)
