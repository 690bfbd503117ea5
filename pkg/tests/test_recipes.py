import pytest

from chiral_feedback.errors import ConfigError
from chiral_feedback.recipes import figure_recipes, get_recipe
from chiral_feedback.sweeps import MPS_SWEEP_OBSERVABLES, columns_for, grid_points


def test_every_preset_expands_to_valid_points():
    for name, config in figure_recipes().items():
        assert columns_for(config), name
        if config.mode == "sweep":
            assert grid_points(config), name


def test_phase_delay_preset_uses_time_bins():
    config = get_recipe("fig6")
    assert config.engine == "mps"
    assert [axis.name for axis in config.grid] == ["tau", "delta_phi"]
    assert columns_for(config)[2:] == MPS_SWEEP_OBSERVABLES
    assert config.time_bins.stop_at_steady


def test_unknown_preset():
    with pytest.raises(ConfigError) as err:
        get_recipe("fig99")
    assert "fig4a" in str(err.value)
