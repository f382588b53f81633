"""Geometric Brownian motion price process."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from .const import DEFAULT_PRICE_FLOOR
from .exceptions import InvalidParameter

_LOGGER = logging.getLogger(__name__)


@dataclass(frozen=True)
class PricePath:
    """Spot prices sampled every dt from a GBM with drift mu and volatility sigma."""

    prices: np.ndarray
    mu: float
    sigma: float
    dt: float

    def __post_init__(self) -> None:
        prices = np.asarray(self.prices, dtype=float)
        if prices.ndim != 1 or prices.size < 1:
            raise InvalidParameter("A price path needs at least one price")
        if np.any(prices <= 0.0):
            raise InvalidParameter("Prices must be strictly positive")
        object.__setattr__(self, "prices", prices)

    @property
    def increments(self) -> np.ndarray:
        """First differences ΔP(t) = P(t+1) − P(t)."""
        return np.diff(self.prices)

    @property
    def log_returns(self) -> np.ndarray:
        return np.diff(np.log(self.prices))


def gbm_step(
    p: float,
    mu: float,
    sigma: float,
    dt: float,
    noise: float,
    floor: float = DEFAULT_PRICE_FLOOR,
) -> float:
    """Advance a price by one Euler–Maruyama step of the GBM.

    Raises:
        InvalidParameter: If p or dt is not positive
    """
    if p <= 0.0 or dt <= 0.0:
        raise InvalidParameter("gbm_step requires p > 0 and dt > 0")
    price = p * (1.0 + mu * dt + sigma * math.sqrt(dt) * noise)
    if price < floor:
        _LOGGER.debug("GBM step %.6g clipped to the price floor %.3g", price, floor)
        return floor
    return price


def simulate_gbm_paths(
    p0: float,
    mu: float,
    sigma: float,
    dt: float,
    steps: int,
    n_paths: int,
    rng: np.random.Generator,
    floor: float = DEFAULT_PRICE_FLOOR,
) -> np.ndarray:
    """Simulate n_paths GBM paths; returns an array of shape (n_paths, steps + 1)."""
    if p0 <= 0.0 or dt <= 0.0:
        raise InvalidParameter("GBM paths require p0 > 0 and dt > 0")
    paths = np.empty((n_paths, steps + 1))
    paths[:, 0] = p0
    noise = rng.standard_normal((n_paths, steps))
    for k in range(steps):
        paths[:, k + 1] = np.maximum(
            paths[:, k] * (1.0 + mu * dt + sigma * math.sqrt(dt) * noise[:, k]),
            floor,
        )
    floored = int(np.count_nonzero(paths[:, 1:] == floor))
    if floored:
        _LOGGER.debug("%s of %s simulated prices sit at the floor", floored, paths[:, 1:].size)
    return paths


def simulate_gbm_path(
    p0: float,
    mu: float,
    sigma: float,
    dt: float,
    steps: int,
    rng: np.random.Generator,
    floor: float = DEFAULT_PRICE_FLOOR,
) -> PricePath:
    """Simulate a single GBM path."""
    prices = simulate_gbm_paths(p0, mu, sigma, dt, steps, 1, rng, floor)[0]
    return PricePath(prices=prices, mu=mu, sigma=sigma, dt=dt)