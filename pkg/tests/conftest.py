"""pytest configuration for the stablecoin ADMM tests."""

from __future__ import annotations

import json
import os

import numpy as np
import pytest

from stablecoin_admm.auction import AuctionInstance


def _fixture_path(*parts: str) -> str:
    return os.path.join(os.path.dirname(__file__), "fixtures", *parts)


@pytest.fixture
def instance_fixture():
    """Fixture to load auction instance files."""

    def _load_instance(file_name: str) -> AuctionInstance:
        return AuctionInstance.load(_fixture_path("instances", file_name))

    return _load_instance


@pytest.fixture
def config_fixture():
    """Fixture to load raw experiment configurations."""

    def _load_config(file_name: str) -> dict:
        with open(_fixture_path("instances", file_name), encoding="utf-8") as file:
            return json.load(file)

    return _load_config


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240601)
