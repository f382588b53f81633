"""Exceptions raised by the stablecoin monetary-policy stack."""

from __future__ import annotations

from typing import Any


class StablecoinError(Exception):
    """Base exception for every error raised by this package."""


class InvalidParameter(StablecoinError, ValueError):
    """Exception raised when a parameter lies outside its admissible range."""


class BoundViolation(StablecoinError):
    """Exception raised when a supply ledger bound would be violated."""


class ClearingMismatch(StablecoinError):
    """Exception raised when auction bids do not sum to the auctioned coins."""


class DimensionMismatch(StablecoinError, ValueError):
    """Exception raised for inconsistent matrix or sequence dimensions."""


class DegenerateScenarioSet(StablecoinError):
    """Exception raised when fewer than two scenarios are supplied."""


class InfeasibleProblem(StablecoinError):
    """Exception raised when an optimisation problem has an empty feasible set."""


class SubproblemFailure(StablecoinError):
    """Exception raised when an inner minimisation fails to produce a solution."""


class IterationLimit(StablecoinError):
    """Exception raised when an iterative method hits its iteration cap."""

    def __init__(self, message: str, result: Any = None) -> None:
        super().__init__(message)
        self.result = result


class DeviationDetected(StablecoinError):
    """Exception raised when transcript re-execution exposes a deviating node."""

    def __init__(self, node: int, round_: int, report: Any = None) -> None:
        super().__init__(f"Node {node} deviated from the protocol at round {round_}")
        self.node = node
        self.round = round_
        self.report = report


class CommitmentMismatch(StablecoinError):
    """Exception raised when an opening does not match its commitment."""

    def __init__(self, node: int, what: str, report: Any = None) -> None:
        super().__init__(f"Node {node} opened a {what} that does not match its commitment")
        self.node = node
        self.what = what
        self.report = report


class ConfigError(StablecoinError):
    """Exception raised for invalid experiment configuration."""

    def __init__(self, errors: dict[str, str]) -> None:
        details = "; ".join(f"{path}: {msg}" for path, msg in sorted(errors.items()))
        super().__init__(f"Invalid configuration: {details}")
        self.errors = errors


class SchemaMismatch(StablecoinError):
    """Exception raised when two run artifacts cannot be compared."""


class ExperimentError(StablecoinError):
    """Exception raised when an experiment epoch fails."""

    def __init__(self, epoch: int, module: str, message: str) -> None:
        super().__init__(f"Epoch {epoch} ({module}): {message}")
        self.epoch = epoch
        self.module = module
