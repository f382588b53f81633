"""On-chain supply ledger, control-variable adjustment and depreciation."""

from __future__ import annotations

import logging
from collections.abc import Sequence
from dataclasses import dataclass, replace
from typing import Any

import numpy as np

from .const import LEDGER_TOLERANCE
from .exceptions import BoundViolation, ClearingMismatch, InvalidParameter

_LOGGER = logging.getLogger(__name__)


@dataclass(frozen=True)
class SupplyState:
    """Supply ledger of a stablecoin at one epoch.

    The minted history holds the coins minted in every epoch so far; the
    current epoch is the last entry.
    """

    t: int
    s_max: float
    s_outstanding: float
    s_unissued: float
    s_initial: float
    s_minted_history: tuple[float, ...]
    reserve: float
    collateral_ratio: float
    br_max: float
    auc_max: float
    lambda_max: float

    @classmethod
    def initial(
        cls,
        s_initial: float,
        s_max: float,
        br_max: float,
        auc_max: float,
        collateral_ratio: float = 1.0,
        lambda_max: float = 2.0,
    ) -> SupplyState:
        """Create the ledger right after the initial offering."""
        state = cls(
            t=0,
            s_max=float(s_max),
            s_outstanding=float(s_initial),
            s_unissued=float(s_max) - float(s_initial),
            s_initial=float(s_initial),
            s_minted_history=(float(s_initial),),
            reserve=float(collateral_ratio) * float(s_initial),
            collateral_ratio=float(collateral_ratio),
            br_max=float(br_max),
            auc_max=float(auc_max),
            lambda_max=float(lambda_max),
        )
        state.validate()
        return state

    def validate(self) -> None:
        """Check every ledger invariant.

        Raises:
            BoundViolation: If an invariant does not hold
        """
        tol = LEDGER_TOLERANCE * max(1.0, self.s_max)
        if not 0.0 <= self.s_initial <= self.s_outstanding + tol:
            raise BoundViolation(
                f"s_initial={self.s_initial} outside [0, s_outstanding={self.s_outstanding}]"
            )
        if self.s_outstanding > self.s_max + tol:
            raise BoundViolation(
                f"s_outstanding={self.s_outstanding} exceeds s_max={self.s_max}"
            )
        if abs(self.s_max - self.s_unissued - self.s_outstanding) > tol:
            raise BoundViolation("s_max must equal s_unissued + s_outstanding")
        if not 1.0 - LEDGER_TOLERANCE <= self.collateral_ratio <= self.lambda_max + LEDGER_TOLERANCE:
            raise BoundViolation(
                f"collateral_ratio={self.collateral_ratio} outside [1, {self.lambda_max}]"
            )
        if abs(self.reserve - self.collateral_ratio * self.s_outstanding) > tol * self.lambda_max:
            raise BoundViolation("reserve must equal collateral_ratio * s_outstanding")

    def to_dict(self) -> dict[str, Any]:
        return {
            "t": self.t,
            "s_max": self.s_max,
            "s_outstanding": self.s_outstanding,
            "s_unissued": self.s_unissued,
            "s_initial": self.s_initial,
            "reserve": self.reserve,
            "collateral_ratio": self.collateral_ratio,
        }


@dataclass(frozen=True)
class ControlUpdate:
    """Controlled variables after a proportional price adjustment."""

    s_max: float
    br: float
    auc: float
    collateral_ratio: float


@dataclass(frozen=True)
class DepreciationSchedule:
    """Per-epoch minted coins subject to a flat depreciation rate."""

    d_rate: float
    minted_by_epoch: tuple[float, ...]

    def __post_init__(self) -> None:
        if not 0.0 <= self.d_rate <= 1.0:
            raise InvalidParameter(f"d_rate={self.d_rate} must lie in [0, 1]")


def _mint(state: SupplyState, coins: float) -> SupplyState:
    history = list(state.s_minted_history)
    history[-1] += coins
    s_outstanding = state.s_outstanding + coins
    return replace(
        state,
        s_outstanding=s_outstanding,
        s_unissued=state.s_unissued - coins,
        s_minted_history=tuple(history),
        reserve=state.collateral_ratio * s_outstanding,
    )


def step_block_reward(state: SupplyState, br: float) -> SupplyState:
    """Pay a block reward out of the unissued pool.

    Args:
        state: Current ledger
        br: Block reward in coins

    Returns:
        The ledger after minting the reward

    Raises:
        BoundViolation: If br is negative, above br_max or above s_unissued
    """
    if br < 0.0 or br > state.br_max + LEDGER_TOLERANCE:
        raise BoundViolation(f"Block reward {br} outside [0, br_max={state.br_max}]")
    if br > state.s_unissued + LEDGER_TOLERANCE:
        raise BoundViolation(
            f"Block reward {br} exceeds unissued supply {state.s_unissued}"
        )
    if br == 0.0:
        return state
    _LOGGER.debug("Epoch %s: block reward %s", state.t, br)
    return _mint(state, float(br))


def apply_auction_issuance(
    state: SupplyState,
    auc_coins: float,
    bids: Sequence[float],
    bid_bounds: Sequence[tuple[float, float]] | None = None,
) -> SupplyState:
    """Issue auctioned coins to the winning bidders.

    Args:
        state: Current ledger
        auc_coins: Coins released by the auction
        bids: Coins allocated to each user
        bid_bounds: Optional per-user (x_min, x_max) bounds to enforce

    Returns:
        The ledger after issuance

    Raises:
        ClearingMismatch: If the bids do not sum to auc_coins
        BoundViolation: If a pool or per-user bound is violated
    """
    bid_values = np.asarray(bids, dtype=float)
    tol = LEDGER_TOLERANCE * max(1.0, abs(auc_coins))
    if abs(float(bid_values.sum()) - auc_coins) > tol:
        raise ClearingMismatch(
            f"Bids sum to {bid_values.sum()} but the auction released {auc_coins}"
        )
    if auc_coins < 0.0 or auc_coins > state.auc_max + tol:
        raise BoundViolation(f"Auctioned coins {auc_coins} outside [0, {state.auc_max}]")
    if auc_coins > state.s_unissued + tol:
        raise BoundViolation(
            f"Auctioned coins {auc_coins} exceed unissued supply {state.s_unissued}"
        )
    if bid_bounds is not None:
        if len(bid_bounds) != bid_values.size:
            raise BoundViolation("One (x_min, x_max) pair is required per bid")
        for index, (bid, (x_min, x_max)) in enumerate(zip(bid_values, bid_bounds, strict=True)):
            if bid < x_min - tol or bid > x_max + tol:
                raise BoundViolation(
                    f"Bid {bid} of user {index} outside [{x_min}, {x_max}]"
                )
    if auc_coins == 0.0:
        return state
    _LOGGER.debug("Epoch %s: auction issued %s coins", state.t, auc_coins)
    return _mint(state, float(auc_coins))


def advance_epoch(state: SupplyState) -> SupplyState:
    """Move the ledger to the next epoch."""
    return replace(state, t=state.t + 1, s_minted_history=(*state.s_minted_history, 0.0))


def adjust_controls(
    state: SupplyState,
    br_prev: float,
    auc_prev: float,
    p_now: float,
    p_prev: float,
) -> ControlUpdate:
    """Scale the controlled variables with the latest price ratio.

    S_max, BR and AUC follow the price ratio while the collateral ratio
    follows its inverse; every control is clipped into its admissible range.

    Raises:
        InvalidParameter: If a price is not positive
    """
    if p_now <= 0.0 or p_prev <= 0.0:
        raise InvalidParameter("Prices must be strictly positive")
    ratio = p_now / p_prev
    return ControlUpdate(
        s_max=max(state.s_max * ratio, state.s_outstanding),
        br=float(np.clip(br_prev * ratio, 0.0, state.br_max)),
        auc=float(np.clip(auc_prev * ratio, 0.0, state.auc_max)),
        collateral_ratio=float(
            np.clip(state.collateral_ratio / ratio, 1.0, state.lambda_max)
        ),
    )


def rebalance_reserve(state: SupplyState, collateral_ratio: float | None = None) -> SupplyState:
    """Re-price the reserve so it backs every outstanding coin at the ratio.

    Raises:
        BoundViolation: If the ratio lies outside [1, lambda_max]
    """
    ratio = state.collateral_ratio if collateral_ratio is None else float(collateral_ratio)
    new_state = replace(
        state, collateral_ratio=ratio, reserve=ratio * state.s_outstanding
    )
    new_state.validate()
    return new_state


def apply_controls(
    state: SupplyState, update: ControlUpdate, adjust_collateral: bool = True
) -> SupplyState:
    """Write a control update into the ledger, rebalancing the reserve."""
    resized = replace(
        state, s_max=update.s_max, s_unissued=update.s_max - state.s_outstanding
    )
    return rebalance_reserve(
        resized, update.collateral_ratio if adjust_collateral else None
    )


def outstanding_with_depreciation(sched: DepreciationSchedule, now: int) -> float:
    """Outstanding supply once every vintage has depreciated up to epoch now.

    Raises:
        InvalidParameter: If a vintage was minted after now
    """
    minted = np.asarray(sched.minted_by_epoch, dtype=float)
    if minted.size == 0:
        return 0.0
    if now < minted.size - 1:
        raise InvalidParameter(
            f"Epoch {now} precedes the last mint epoch {minted.size - 1}"
        )
    ages = now - np.arange(minted.size)
    depreciation = np.minimum(ages * sched.d_rate * minted, minted)
    return float(np.sum(minted - depreciation))
