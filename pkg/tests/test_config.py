"""Tests for experiment configuration loading and validation."""

from __future__ import annotations

import json

import pytest

from stablecoin_admm.config import default_config, load_config, validate_config
from stablecoin_admm.const import (
    DEFAULT_EPOCHS,
    DEFAULT_HORIZON,
    DEFAULT_SEED,
    MODEL_ALGORITHMIC,
    SOLVER_CENTRALIZED,
)
from stablecoin_admm.exceptions import ConfigError


def test_defaults():
    """Test that an empty document validates to the defaults."""
    config = default_config()

    assert config.seed == DEFAULT_SEED
    assert config.epochs == DEFAULT_EPOCHS
    assert config.model == MODEL_ALGORITHMIC
    assert config.mpc.horizon == DEFAULT_HORIZON
    assert config.mpc.solver == SOLVER_CENTRALIZED
    assert config.mpc.residual_balancing
    assert len(config.auction.users) == 2
    assert config.network.alpha == (1.0, 1.0)
    assert not config.secure.enabled


def test_load_small_experiment(tmp_path, config_fixture):
    """Test loading a partial document from disk."""
    path = tmp_path / "experiment.json"
    path.write_text(json.dumps(config_fixture("experiment_small.json")), encoding="utf-8")

    config = load_config(path)

    assert config.seed == 7
    assert config.epochs == 12
    assert config.gbm.sigma == 0.05
    assert config.mpc.scenarios == 3
    assert config.predictor.window == 3
    assert config.predictor.hidden == ()
    assert [u["id"] for u in config.auction.users] == ["u1", "u2"]


def test_to_dict_validates_back(config_fixture):
    """Test that a serialised configuration is itself a valid document."""
    config = validate_config(config_fixture("experiment_small.json"))
    assert validate_config(config.to_dict()) == config


def test_schema_errors_are_collected():
    """Test that every offending field is reported at once."""
    with pytest.raises(ConfigError) as err:
        validate_config(
            {"epochs": -1, "mpc": {"lambda": 2.0, "solver": "simplex"}, "bogus": 1}
        )

    assert {"epochs", "mpc.lambda", "mpc.solver", "bogus"} <= set(err.value.errors)


def test_cross_field_errors():
    """Test constraints spanning several fields."""
    with pytest.raises(ConfigError) as err:
        validate_config(
            {
                "mpc": {"horizon": 2, "consensus_horizon": 3},
                "supply": {"br": 5.0, "br_max": 1.0},
                "auction": {
                    "users": [
                        {"id": "a", "x_min": 2.0, "x": 1.0, "x_max": 3.0, "c": 0.1},
                        {"id": "a", "x_min": 0.0, "x": 1.0, "x_max": 3.0, "c": 0.1},
                    ]
                },
                "network": {"alpha": [0.5]},
                "secure": {"enabled": True},
            }
        )

    assert set(err.value.errors) == {
        "mpc.consensus_horizon",
        "supply.br",
        "auction.users.0",
        "auction.users",
        "network.alpha",
        "secure.enabled",
    }


def test_per_user_availability():
    """Test that a list of online probabilities is kept per user."""
    config = validate_config({"network": {"alpha": [0.5, 0.9]}})
    assert config.network.alpha == (0.5, 0.9)


def test_predictor_warmup_must_cover_window():
    """Test that the warmup leaves room for a training set."""
    with pytest.raises(ConfigError) as err:
        validate_config({"predictor": {"window": 5, "warmup": 6}})
    assert "predictor.warmup" in err.value.errors

    config = validate_config({"predictor": {"enabled": False, "window": 5, "warmup": 6}})
    assert not config.predictor.enabled


def test_unreadable_files(tmp_path):
    """Test missing files, broken JSON and non-object documents."""
    with pytest.raises(ConfigError):
        load_config(tmp_path / "missing.json")

    broken = tmp_path / "broken.json"
    broken.write_text("{", encoding="utf-8")
    with pytest.raises(ConfigError) as err:
        load_config(broken)
    assert "<file>" in err.value.errors

    listed = tmp_path / "list.json"
    listed.write_text("[]", encoding="utf-8")
    with pytest.raises(ConfigError) as err:
        load_config(listed)
    assert "<root>" in err.value.errors


def test_with_overrides_skips_none():
    """Test that unset command-line flags keep configured values."""
    config = default_config().with_overrides(seed=11, output_dir=None, threads=None)

    assert config.seed == 11
    assert config.output_dir == default_config().output_dir
