"""Tests for the GBM price process."""

from __future__ import annotations

import logging

import numpy as np
import pytest

from stablecoin_admm.const import DEFAULT_PRICE_FLOOR
from stablecoin_admm.exceptions import InvalidParameter
from stablecoin_admm.price import PricePath, gbm_step, simulate_gbm_path, simulate_gbm_paths


def test_gbm_step_without_noise_or_drift():
    """Test that a flat process keeps its price."""
    assert gbm_step(1.0, 0.0, 0.0, 1.0, 0.7) == 1.0


def test_gbm_step_deterministic_drift():
    """Test one drift step."""
    assert gbm_step(1.0, 0.1, 0.0, 1.0, 0.0) == pytest.approx(1.1)


def test_gbm_step_is_floored(caplog):
    """Test that a large negative shock is floored at a positive price."""
    with caplog.at_level(logging.DEBUG, logger="stablecoin_admm.price"):
        assert gbm_step(1.0, 0.0, 1.0, 1.0, -5.0) == DEFAULT_PRICE_FLOOR
    assert "price floor" in caplog.text


def test_floored_paths_are_logged(rng, caplog):
    """Test that paths report how many prices hit the floor."""
    with caplog.at_level(logging.DEBUG, logger="stablecoin_admm.price"):
        paths = simulate_gbm_paths(1.0, 0.0, 5.0, 1.0, 20, 4, rng)
    assert np.any(paths == DEFAULT_PRICE_FLOOR)
    assert "at the floor" in caplog.text


def test_gbm_step_rejects_bad_inputs():
    """Test that p and dt must be positive."""
    with pytest.raises(InvalidParameter):
        gbm_step(0.0, 0.0, 0.1, 1.0, 0.0)
    with pytest.raises(InvalidParameter):
        gbm_step(1.0, 0.0, 0.1, 0.0, 0.0)


def test_paths_shape_and_start():
    """Test the shape of simulated paths."""
    paths = simulate_gbm_paths(2.0, 0.0, 0.1, 1.0, 10, 4, np.random.default_rng(1))

    assert paths.shape == (4, 11)
    np.testing.assert_array_equal(paths[:, 0], 2.0)
    assert np.all(paths > 0.0)


def test_paths_are_reproducible():
    """Test that a seed fixes the paths."""
    first = simulate_gbm_paths(1.0, 0.01, 0.2, 1.0, 20, 3, np.random.default_rng(5))
    second = simulate_gbm_paths(1.0, 0.01, 0.2, 1.0, 20, 3, np.random.default_rng(5))
    np.testing.assert_array_equal(first, second)


def test_paths_match_expected_growth(rng):
    """Test that the mean terminal price grows like (1 + mu dt)^T."""
    paths = simulate_gbm_paths(1.0, 0.01, 0.05, 1.0, 20, 20_000, rng)
    expected = 1.01**20
    stderr = paths[:, -1].std() / np.sqrt(paths.shape[0])

    assert abs(paths[:, -1].mean() - expected) < 4.0 * stderr


def test_single_path(rng):
    """Test the single-path wrapper and its derived series."""
    path = simulate_gbm_path(1.0, 0.0, 0.05, 1.0, 5, rng)

    assert path.prices.shape == (6,)
    assert path.increments.shape == (5,)
    np.testing.assert_allclose(np.exp(np.cumsum(path.log_returns)), path.prices[1:])


def test_price_path_rejects_non_positive_prices():
    """Test that a path with a zero price is rejected."""
    with pytest.raises(InvalidParameter):
        PricePath(prices=np.array([1.0, 0.0]), mu=0.0, sigma=0.1, dt=1.0)
