"""Tests for the command-line entry point."""

from __future__ import annotations

import json
import os

import pandas as pd
import pytest

from stablecoin_admm.cli import main
from stablecoin_admm.const import (
    COMPARISON_FILE,
    EPOCHS_FILE,
    EXIT_CONFIG_ERROR,
    EXIT_OK,
    PROBE_FILE,
    STABILITY_FILE,
    SUMMARY_FILE,
)

INSTANCES = os.path.join(os.path.dirname(__file__), "fixtures", "instances")


@pytest.fixture
def config_path(tmp_path, config_fixture):
    raw = config_fixture("experiment_small.json")
    raw["epochs"] = 3
    path = tmp_path / "config.json"
    path.write_text(json.dumps(raw), encoding="utf-8")
    return str(path)


def test_run_writes_artifacts(config_path, tmp_path):
    """Test a single seeded run."""
    out = tmp_path / "run"

    assert main(["run", "--config", config_path, "--out", str(out)]) == EXIT_OK
    assert len(pd.read_csv(out / EPOCHS_FILE)) == 3
    assert (out / SUMMARY_FILE).exists()


def test_run_several_seeds(config_path, tmp_path):
    """Test one output directory per seed."""
    out = tmp_path / "sweep"

    code = main(
        ["run", "--config", config_path, "--seeds", "2", "--seed", "5", "--out", str(out)]
    )

    assert code == EXIT_OK
    assert sorted(p.name for p in out.iterdir()) == ["seed_5", "seed_6"]


def test_invalid_config_exit_code(tmp_path, caplog):
    """Test that validation errors exit with the configuration code."""
    path = tmp_path / "bad.json"
    path.write_text(json.dumps({"epochs": -1, "mpc": {"lambda": 3}}), encoding="utf-8")

    assert main(["run", "--config", str(path), "--out", str(tmp_path)]) == EXIT_CONFIG_ERROR
    assert "mpc.lambda" in caplog.text


def test_missing_config_exit_code(tmp_path):
    """Test that an unreadable file is a configuration error."""
    missing = str(tmp_path / "missing.json")
    assert main(["run", "--config", missing]) == EXIT_CONFIG_ERROR


def test_stability_region(tmp_path):
    """Test the Taylor-rule gain sweep."""
    code = main(
        ["stability-region", "--phi-y", "0:2:3", "--phi-pi", "0:2:3", "--out", str(tmp_path)]
    )

    frame = pd.read_csv(tmp_path / STABILITY_FILE)
    assert code == EXIT_OK
    assert len(frame) == 9
    assert list(frame.columns) == ["phi_y", "phi_pi", "stable", "spectral_radius"]


def test_stability_region_to_stdout(capsys):
    """Test that results go to stdout without --out."""
    assert main(["stability-region", "--phi-y", "0:1:2", "--phi-pi", "1.5:1.5:1"]) == EXIT_OK
    assert capsys.readouterr().out.startswith("phi_y,phi_pi,stable,spectral_radius\n")


def test_bad_grid_is_a_usage_error():
    """Test that malformed grids are rejected by the parser."""
    with pytest.raises(SystemExit) as err:
        main(["stability-region", "--phi-y", "0:2"])
    assert err.value.code == 2


def test_auction_probe_instance(tmp_path):
    """Test the strategyproofness probe on an instance file."""
    instance = os.path.join(INSTANCES, "two_users.json")

    code = main(["auction-probe", "--instance", instance, "--points", "5", "--out", str(tmp_path)])

    frame = pd.read_csv(tmp_path / PROBE_FILE)
    assert code == EXIT_OK
    assert frame["user"].tolist() == ["alice", "bob"]
    assert (frame["max_gain"] <= 1e-9).all()


def test_auction_probe_bad_instance(tmp_path):
    """Test that an unreadable instance is a configuration error."""
    path = tmp_path / "instance.json"
    path.write_text("{}", encoding="utf-8")
    assert main(["auction-probe", "--instance", str(path)]) == EXIT_CONFIG_ERROR


def test_compare_directories(config_path, tmp_path):
    """Test comparing two written runs."""
    main(["run", "--config", config_path, "--out", str(tmp_path / "a")])
    main(["run", "--config", config_path, "--baseline", "--out", str(tmp_path / "b")])

    code = main(
        ["compare", str(tmp_path / "a"), str(tmp_path / "b"), "--out", str(tmp_path / "cmp")]
    )

    assert code == EXIT_OK
    frame = pd.read_csv(tmp_path / "cmp" / COMPARISON_FILE)
    assert list(frame.columns) == ["metric", "a", "b", "delta", "ratio"]


def test_compare_against_baseline(config_path, tmp_path):
    """Test comparing a fresh controlled run with its baseline."""
    code = main(["compare", "--config", config_path, "--out", str(tmp_path)])

    assert code == EXIT_OK
    assert (tmp_path / COMPARISON_FILE).exists()


def test_compare_needs_zero_or_two_runs(tmp_path):
    """Test that a single run directory is a usage error."""
    with pytest.raises(SystemExit) as err:
        main(["compare", str(tmp_path)])
    assert err.value.code == 2


def test_compare_missing_runs_fail(tmp_path):
    """Test that missing run directories fail at runtime."""
    code = main(["compare", str(tmp_path / "x"), str(tmp_path / "y")])
    assert code not in (EXIT_OK, EXIT_CONFIG_ERROR)
