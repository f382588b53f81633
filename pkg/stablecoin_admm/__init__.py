"""Decentralised stablecoin monetary-policy stack."""

from __future__ import annotations

from .auction import (
    AuctionInstance,
    AuctionOutcome,
    DemandReport,
    IssuanceBounds,
    ValuationModel,
    run_auction,
    strategyproofness_probe,
)
from .config import ExperimentConfig, default_config, load_config, validate_config
from .consensus import NetworkModel, run_dual_consensus, run_protocol_one
from .coordinator import RunArtifacts, compare_runs, run_experiment, run_seeds
from .exceptions import StablecoinError
from .predictor import PricePredictor
from .scenario_mpc import LinearSystem, ScenarioOcp, run_admm, solve_ocp
from .secure import committed_protocol_run, verify_transcript
from .supply import SupplyState

__version__ = "0.1.0"

__all__ = [
    "AuctionInstance",
    "AuctionOutcome",
    "DemandReport",
    "ExperimentConfig",
    "IssuanceBounds",
    "LinearSystem",
    "NetworkModel",
    "PricePredictor",
    "RunArtifacts",
    "ScenarioOcp",
    "StablecoinError",
    "SupplyState",
    "ValuationModel",
    "committed_protocol_run",
    "compare_runs",
    "default_config",
    "load_config",
    "run_admm",
    "run_auction",
    "run_dual_consensus",
    "run_experiment",
    "run_protocol_one",
    "run_seeds",
    "solve_ocp",
    "strategyproofness_probe",
    "validate_config",
    "verify_transcript",
]
