"""Divisible-coin issuance auction with VCG payments.

Valuations are concave quadratics v_{i,t}(x) = a + b·x − c·x² and the
manager's cost is c_t(y) = κ₀ + κ₂·y². Allocations solve the social
welfare problem with the coupling Σ_i x_{i,t} = y_t.
"""

from __future__ import annotations

import json
import logging
from collections.abc import Sequence
from concurrent.futures import Executor
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Any

import numpy as np
import numpy.typing as npt
import pandas as pd
import scipy.sparse as sparse

from .const import (
    ALLOCATION_TOLERANCE,
    CONF_KAPPA0,
    CONF_KAPPA2,
    CONF_USER_ID,
    CONF_USERS,
    CONF_VALUE_A,
    CONF_VALUE_B,
    CONF_VALUE_C,
    CONF_X,
    CONF_X_MAX,
    CONF_X_MIN,
    OVERSTATEMENT_PENALTY_FACTOR,
    TIE_BREAK_WEIGHT,
)
from .exceptions import DimensionMismatch, InfeasibleProblem, InvalidParameter
from .qp import solve_qp

_LOGGER = logging.getLogger(__name__)


def _vector(value: npt.ArrayLike) -> np.ndarray:
    return np.atleast_1d(np.asarray(value, dtype=float)).reshape(-1)


@dataclass(frozen=True)
class DemandReport:
    """Per-slot demand (x_min, x, x_max) reported by one user."""

    user_id: str
    x_min: np.ndarray
    x: np.ndarray
    x_max: np.ndarray

    def __post_init__(self) -> None:
        x_min, x, x_max = _vector(self.x_min), _vector(self.x), _vector(self.x_max)
        if not x_min.shape == x.shape == x_max.shape:
            raise DimensionMismatch(f"Report of {self.user_id} has inconsistent slot counts")
        if np.any(x_min < 0.0):
            raise InvalidParameter(f"Report of {self.user_id} has negative x_min")
        if np.any(x_min > x) or np.any(x > x_max):
            raise InvalidParameter(
                f"Report of {self.user_id} violates x_min <= x <= x_max"
            )
        object.__setattr__(self, "x_min", x_min)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "x_max", x_max)

    @property
    def slots(self) -> int:
        return int(self.x.size)


@dataclass(frozen=True)
class ValuationModel:
    """Quadratic valuations of every user and the manager's cost per slot.

    a, b, c have shape (N, T); kappa0 and kappa2 have shape (T,).
    """

    a: np.ndarray
    b: np.ndarray
    c: np.ndarray
    kappa0: np.ndarray
    kappa2: np.ndarray

    def __post_init__(self) -> None:
        a = np.atleast_2d(np.asarray(self.a, dtype=float))
        b = np.atleast_2d(np.asarray(self.b, dtype=float))
        c = np.atleast_2d(np.asarray(self.c, dtype=float))
        if not a.shape == b.shape == c.shape:
            raise DimensionMismatch("Valuation parameters a, b, c must share one shape")
        T = a.shape[1]
        kappa0 = np.broadcast_to(_vector(self.kappa0), (T,)).copy()
        kappa2 = np.broadcast_to(_vector(self.kappa2), (T,)).copy()
        if np.any(b < 0.0) or np.any(c < 0.0):
            raise InvalidParameter("Valuations need b >= 0 and c >= 0")
        if np.any(kappa0 < 0.0) or np.any(kappa2 < 0.0):
            raise InvalidParameter("Cost coefficients must be non-negative")
        for name, value in (("a", a), ("b", b), ("c", c), ("kappa0", kappa0), ("kappa2", kappa2)):
            object.__setattr__(self, name, value)

    @property
    def users(self) -> int:
        return int(self.a.shape[0])

    @property
    def slots(self) -> int:
        return int(self.a.shape[1])

    def value(self, allocation: npt.ArrayLike) -> np.ndarray:
        """Per-user, per-slot valuation of an (N, T) allocation."""
        x = np.asarray(allocation, dtype=float)
        return self.a + self.b * x - self.c * x**2

    def cost(self, issuance: npt.ArrayLike) -> np.ndarray:
        """Per-slot manager cost of an issuance vector."""
        y = np.asarray(issuance, dtype=float)
        return self.kappa0 + self.kappa2 * y**2

    def reported(self, reports: Sequence[DemandReport]) -> ValuationModel:
        """Valuations implied by reports: strictly concave entries peak at x̂."""
        x_hat = np.vstack([r.x for r in reports])
        if x_hat.shape != self.b.shape:
            raise DimensionMismatch("Reports do not match the valuation shape")
        b = np.where(self.c > 0.0, 2.0 * self.c * x_hat, self.b)
        return replace(self, b=b)


@dataclass(frozen=True)
class IssuanceBounds:
    """Admissible auctioned coins per slot, y ∈ [y_min, y_max]."""

    y_min: np.ndarray
    y_max: np.ndarray

    def __post_init__(self) -> None:
        y_min, y_max = _vector(self.y_min), _vector(self.y_max)
        if y_min.shape != y_max.shape:
            raise DimensionMismatch("y_min and y_max must have the same length")
        object.__setattr__(self, "y_min", y_min)
        object.__setattr__(self, "y_max", y_max)


@dataclass(frozen=True)
class AuctionInstance:
    """Truthful reports, true valuations and issuance bounds of one auction."""

    reports: tuple[DemandReport, ...]
    valuation: ValuationModel
    bounds: IssuanceBounds

    def __post_init__(self) -> None:
        if len(self.reports) != self.valuation.users:
            raise DimensionMismatch("One report is required per valuation row")
        if any(r.slots != self.valuation.slots for r in self.reports):
            raise DimensionMismatch("Reports and valuations disagree on the slot count")
        if self.bounds.y_min.size != self.valuation.slots:
            raise DimensionMismatch("Issuance bounds disagree on the slot count")

    @property
    def user_ids(self) -> tuple[str, ...]:
        return tuple(r.user_id for r in self.reports)

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> AuctionInstance:
        """Build an instance from the JSON layout (one object per user)."""
        users = data[CONF_USERS]
        reports = tuple(
            DemandReport(
                user_id=str(user[CONF_USER_ID]),
                x_min=user[CONF_X_MIN],
                x=user[CONF_X],
                x_max=user[CONF_X_MAX],
            )
            for user in users
        )
        slots = reports[0].slots if reports else 0
        a = np.vstack([np.broadcast_to(_vector(u.get(CONF_VALUE_A, 0.0)), (slots,)) for u in users])
        c = np.vstack([np.broadcast_to(_vector(u[CONF_VALUE_C]), (slots,)) for u in users])
        b_given = np.vstack(
            [np.broadcast_to(_vector(u.get(CONF_VALUE_B, 0.0)), (slots,)) for u in users]
        )
        valuation = ValuationModel(
            a=a, b=b_given, c=c, kappa0=data.get(CONF_KAPPA0, 0.0), kappa2=data.get(CONF_KAPPA2, 0.0)
        ).reported(reports)
        bounds = IssuanceBounds(
            y_min=np.broadcast_to(_vector(data.get("y_min", 0.0)), (slots,)),
            y_max=np.broadcast_to(_vector(data["y_max"]), (slots,)),
        )
        return cls(reports=reports, valuation=valuation, bounds=bounds)

    @classmethod
    def load(cls, path: str | Path) -> AuctionInstance:
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))

    def to_dict(self) -> dict[str, Any]:
        val = self.valuation
        return {
            CONF_USERS: [
                {
                    CONF_USER_ID: r.user_id,
                    CONF_X_MIN: r.x_min.tolist(),
                    CONF_X: r.x.tolist(),
                    CONF_X_MAX: r.x_max.tolist(),
                    CONF_VALUE_A: val.a[i].tolist(),
                    CONF_VALUE_B: val.b[i].tolist(),
                    CONF_VALUE_C: val.c[i].tolist(),
                }
                for i, r in enumerate(self.reports)
            ],
            CONF_KAPPA0: val.kappa0.tolist(),
            CONF_KAPPA2: val.kappa2.tolist(),
            "y_min": self.bounds.y_min.tolist(),
            "y_max": self.bounds.y_max.tolist(),
        }


@dataclass(frozen=True)
class AuctionOutcome:
    """Allocation, issuance and VCG payments of one auction."""

    allocation: np.ndarray
    issuance: np.ndarray
    payments: np.ndarray
    welfare: float
    exclusions: np.ndarray
    user_ids: tuple[str, ...]
    cost: np.ndarray
    iterations: int | None = None

    @property
    def manager_utility(self) -> float:
        """Σ payments − Σ cost."""
        return float(self.payments.sum() - self.cost.sum())

    def to_frame(self) -> pd.DataFrame:
        """One row per (user, slot)."""
        rows = [
            {
                "user": user,
                "slot": t,
                "allocation": float(self.allocation[i, t]),
                "payment": float(self.payments[i, t]),
            }
            for i, user in enumerate(self.user_ids)
            for t in range(self.allocation.shape[1])
        ]
        return pd.DataFrame(rows, columns=["user", "slot", "allocation", "payment"])

    def to_dict(self) -> dict[str, Any]:
        return {
            "user_ids": list(self.user_ids),
            "allocation": self.allocation.tolist(),
            "issuance": self.issuance.tolist(),
            "payments": self.payments.tolist(),
            "welfare": self.welfare,
            "manager_utility": self.manager_utility,
            "iterations": self.iterations,
        }


def _box(reports: Sequence[DemandReport]) -> tuple[np.ndarray, np.ndarray]:
    return np.vstack([r.x_min for r in reports]), np.vstack([r.x_max for r in reports])


def tie_break_curvature(valuations: ValuationModel, user_ids: Sequence[str]) -> np.ndarray:
    """Curvature added to linear valuations; smaller ids get less."""
    order = np.argsort(np.asarray(user_ids, dtype=object), kind="stable")
    rank = np.empty(len(user_ids))
    rank[order] = np.arange(len(user_ids))
    return np.where(valuations.c > 0.0, 0.0, TIE_BREAK_WEIGHT * (rank[:, None] + 1.0))


def solve_welfare(
    reports: Sequence[DemandReport],
    valuations: ValuationModel,
    bounds: IssuanceBounds,
) -> tuple[np.ndarray, np.ndarray, float]:
    """Maximise Σ v(x) − Σ c(y) subject to the boxes and Σ_i x_{i,t} = y_t.

    Args:
        reports: Reported demand bounds of every user
        valuations: Valuations used by the mechanism
        bounds: Issuance bounds of the slot

    Returns:
        Allocation (N, T), issuance (T,) and the welfare value

    Raises:
        InfeasibleProblem: If the demand bounds cannot meet the issuance bounds
    """
    x_min, x_max = _box(reports)
    N, T = x_min.shape
    if x_min.shape != valuations.a.shape:
        raise DimensionMismatch("Reports do not match the valuation shape")
    if np.any(x_min.sum(axis=0) > bounds.y_max + ALLOCATION_TOLERANCE) or np.any(
        x_max.sum(axis=0) < bounds.y_min - ALLOCATION_TOLERANCE
    ):
        raise InfeasibleProblem("Demand bounds cannot meet the issuance bounds")
    if np.any(bounds.y_min > bounds.y_max):
        raise InfeasibleProblem("Issuance bounds are empty (y_min > y_max)")

    curvature = valuations.c + tie_break_curvature(valuations, [r.user_id for r in reports])
    P = sparse.diags(
        np.concatenate([2.0 * curvature.reshape(-1), 2.0 * valuations.kappa2]), format="csc"
    )
    q = np.concatenate([-valuations.b.reshape(-1), np.zeros(T)])
    coupling = sparse.hstack([sparse.kron(np.ones((1, N)), sparse.eye(T)), -sparse.eye(T)])
    A = sparse.vstack([sparse.eye(N * T + T), coupling], format="csc")
    lower = np.concatenate([x_min.reshape(-1), bounds.y_min, np.zeros(T)])
    upper = np.concatenate([x_max.reshape(-1), bounds.y_max, np.zeros(T)])

    solution = solve_qp(P, q, A, lower, upper)
    allocation = np.clip(solution.x[: N * T].reshape(N, T), x_min, x_max)
    issuance = allocation.sum(axis=0)
    welfare = float(valuations.value(allocation).sum() - valuations.cost(issuance).sum())
    return allocation, issuance, welfare


def standalone_optimum(report: DemandReport, a: np.ndarray, b: np.ndarray, c: np.ndarray) -> np.ndarray:
    """Per-slot maximiser of a + b·x − c·x² over [x_min, x_max]."""
    with np.errstate(divide="ignore", invalid="ignore"):
        peak = np.where(c > 0.0, b / (2.0 * np.where(c > 0.0, c, 1.0)), np.where(b > 0.0, np.inf, 0.0))
    return np.clip(peak, report.x_min, report.x_max)


def solve_excluding(
    reports: Sequence[DemandReport], valuations: ValuationModel, i: int
) -> np.ndarray:
    """Allocation maximising Σ_{j≠i} v_j(x_j) over the boxes only.

    The problem is separable, so each user takes its clipped peak. Row i of
    the result is zero; with a single user the result is all zeros.
    """
    N = len(reports)
    result = np.zeros((N, valuations.slots))
    for j, report in enumerate(reports):
        if j == i:
            continue
        result[j] = standalone_optimum(report, valuations.a[j], valuations.b[j], valuations.c[j])
    return result


def vcg_payment(
    allocation: np.ndarray,
    issuance: np.ndarray,
    exclusion: np.ndarray,
    valuations: ValuationModel,
    i: int,
    t: int,
) -> float:
    """p_{i,t} = Σ_{j≠i} v_{j,t}(x^{−i}) − Σ_{j≠i} v_{j,t}(x*) + c_t(y*)."""
    others = [j for j in range(valuations.users) if j != i]
    excluded_value = valuations.value(exclusion)[others, t].sum()
    realised_value = valuations.value(allocation)[others, t].sum()
    return float(excluded_value - realised_value + valuations.cost(issuance)[t])


def user_utility(
    valuations: ValuationModel,
    allocation: np.ndarray,
    payments: np.ndarray,
    i: int,
) -> float:
    """Σ_t v_{i,t}(x_{i,t}) − Σ_t p_{i,t}."""
    return float(valuations.value(allocation)[i].sum() - np.asarray(payments)[i].sum())


def outcome_from_allocation(
    reports: Sequence[DemandReport],
    valuations: ValuationModel,
    allocation: np.ndarray,
    issuance: np.ndarray,
    executor: Executor | None = None,
    iterations: int | None = None,
) -> AuctionOutcome:
    """Attach exclusion allocations and VCG payments to an allocation."""
    N, T = allocation.shape
    if executor is None:
        exclusions = [solve_excluding(reports, valuations, i) for i in range(N)]
    else:
        exclusions = list(
            executor.map(lambda i: solve_excluding(reports, valuations, i), range(N))
        )
    payments = np.array(
        [
            [vcg_payment(allocation, issuance, exclusions[i], valuations, i, t) for t in range(T)]
            for i in range(N)
        ]
    ).reshape(N, T)
    cost = valuations.cost(issuance)
    return AuctionOutcome(
        allocation=allocation,
        issuance=issuance,
        payments=payments,
        welfare=float(valuations.value(allocation).sum() - cost.sum()),
        exclusions=np.asarray(exclusions).reshape(N, N, T),
        user_ids=tuple(r.user_id for r in reports),
        cost=cost,
        iterations=iterations,
    )


def run_auction(
    reports: Sequence[DemandReport],
    valuations: ValuationModel,
    bounds: IssuanceBounds,
    executor: Executor | None = None,
) -> AuctionOutcome:
    """Solve the welfare problem, every exclusion problem and all payments.

    Args:
        reports: Reported demands
        valuations: Valuations the mechanism optimises
        bounds: Issuance bounds
        executor: Optional executor for the exclusion problems

    Returns:
        The complete auction outcome
    """
    allocation, issuance, _ = solve_welfare(reports, valuations, bounds)
    outcome = outcome_from_allocation(reports, valuations, allocation, issuance, executor)
    _LOGGER.debug(
        "Auction cleared %s coins, payments %s", issuance.sum(), outcome.payments.sum()
    )
    return outcome


def truthful_outcome(instance: AuctionInstance) -> AuctionOutcome:
    return run_auction(
        instance.reports, instance.valuation.reported(instance.reports), instance.bounds
    )


def apply_overstatement_penalty(
    outcome: AuctionOutcome, i: int, true_x_max: npt.ArrayLike
) -> AuctionOutcome:
    """Void allocations above the true capacity and double their payments."""
    capacity = _vector(true_x_max)
    overstated = outcome.allocation[i] > capacity + ALLOCATION_TOLERANCE
    if not np.any(overstated):
        return outcome
    _LOGGER.warning(
        "User %s was allocated beyond its capacity in %s slots",
        outcome.user_ids[i],
        int(overstated.sum()),
    )
    allocation = outcome.allocation.copy()
    payments = outcome.payments.copy()
    allocation[i, overstated] = 0.0
    payments[i, overstated] *= OVERSTATEMENT_PENALTY_FACTOR
    return replace(outcome, allocation=allocation, payments=payments)


def misreport_grid(report: DemandReport, points: int = 21) -> list[DemandReport]:
    """Misreports of the demanded amount plus tightened bounds.

    The demanded amount sweeps [x_min, x_max]; x_max is also understated and
    x_min overstated to the demanded amount.
    """
    grid = []
    for fraction in np.linspace(0.0, 1.0, points):
        x = report.x_min + fraction * (report.x_max - report.x_min)
        grid.append(replace(report, x=x))
    grid.append(replace(report, x_max=report.x.copy()))
    grid.append(replace(report, x_min=report.x.copy()))
    return grid


def overstatement_grid(report: DemandReport, factors: Sequence[float]) -> list[DemandReport]:
    """Reports with x_max (and the demanded amount) scaled up by each factor."""
    return [
        replace(report, x=report.x * factor, x_max=report.x_max * factor) for factor in factors
    ]


def strategyproofness_probe(
    instance: AuctionInstance,
    i: int,
    grid: Sequence[DemandReport] | None = None,
) -> float:
    """Largest utility gain user i obtains from any misreport in the grid.

    Utilities are evaluated with the true valuations. A misreport whose
    allocation exceeds the true x_max is penalised first.
    """
    truthful = truthful_outcome(instance)
    true_val = instance.valuation.reported(instance.reports)
    baseline = user_utility(true_val, truthful.allocation, truthful.payments, i)
    candidates = misreport_grid(instance.reports[i]) if grid is None else list(grid)

    best_gain = -np.inf
    for misreport in candidates:
        reports = list(instance.reports)
        reports[i] = misreport
        try:
            outcome = run_auction(reports, instance.valuation.reported(reports), instance.bounds)
        except InfeasibleProblem:
            continue
        outcome = apply_overstatement_penalty(outcome, i, instance.reports[i].x_max)
        gain = user_utility(true_val, outcome.allocation, outcome.payments, i) - baseline
        best_gain = max(best_gain, gain)
    return float(best_gain)
