"""Tests for the supply ledger."""

from __future__ import annotations

from dataclasses import replace

import numpy as np
import pytest

from stablecoin_admm.exceptions import BoundViolation, ClearingMismatch, InvalidParameter
from stablecoin_admm.supply import (
    DepreciationSchedule,
    SupplyState,
    adjust_controls,
    advance_epoch,
    apply_auction_issuance,
    apply_controls,
    outstanding_with_depreciation,
    rebalance_reserve,
    step_block_reward,
)


def _ledger(**overrides) -> SupplyState:
    options = {"s_initial": 100.0, "s_max": 150.0, "br_max": 100.0, "auc_max": 50.0}
    options.update(overrides)
    return SupplyState.initial(**options)


def test_initial_ledger():
    """Test the ledger right after the initial offering."""
    state = _ledger(collateral_ratio=1.5)

    assert state.t == 0
    assert state.s_outstanding == 100.0
    assert state.s_unissued == 50.0
    assert state.s_minted_history == (100.0,)
    assert state.reserve == pytest.approx(150.0)


def test_initial_ledger_rejects_oversized_offering():
    """Test that the initial offering cannot exceed the cap."""
    with pytest.raises(BoundViolation):
        _ledger(s_initial=200.0)


def test_block_reward_conserves_supply():
    """Test that a block reward moves coins from unissued to outstanding."""
    state = step_block_reward(_ledger(), 10.0)

    assert state.s_outstanding == pytest.approx(110.0)
    assert state.s_unissued == pytest.approx(40.0)
    assert state.s_minted_history[-1] == pytest.approx(110.0)


def test_zero_block_reward_is_identity():
    """Test that a zero reward leaves the ledger unchanged."""
    state = _ledger()
    assert step_block_reward(state, 0.0) is state


def test_block_reward_beyond_unissued():
    """Test that a reward larger than the unissued pool is rejected."""
    with pytest.raises(BoundViolation):
        step_block_reward(_ledger(), 60.0)


def test_block_reward_beyond_cap():
    """Test that a reward above br_max is rejected."""
    with pytest.raises(BoundViolation):
        step_block_reward(_ledger(br_max=5.0), 6.0)


def test_auction_issuance():
    """Test that auctioned coins are minted to the bidders."""
    state = _ledger(s_max=200.0)
    issued = apply_auction_issuance(state, 30.0, [10.0, 20.0])

    assert issued.s_unissued == pytest.approx(70.0)
    assert issued.s_outstanding == pytest.approx(130.0)


def test_auction_issuance_clearing_mismatch():
    """Test that bids must sum to the released coins."""
    with pytest.raises(ClearingMismatch):
        apply_auction_issuance(_ledger(s_max=200.0), 30.0, [10.0, 25.0])


def test_empty_auction_is_identity():
    """Test that an empty auction leaves the ledger unchanged."""
    state = _ledger()
    assert apply_auction_issuance(state, 0.0, []) is state


def test_auction_issuance_above_cap():
    """Test that issuance above auc_max is rejected."""
    with pytest.raises(BoundViolation):
        apply_auction_issuance(_ledger(s_max=500.0, auc_max=20.0), 30.0, [30.0])


def test_auction_issuance_checks_bid_bounds():
    """Test that a bid outside its (x_min, x_max) box is rejected."""
    with pytest.raises(BoundViolation):
        apply_auction_issuance(
            _ledger(), 10.0, [4.0, 6.0], bid_bounds=[(0.0, 5.0), (0.0, 5.0)]
        )


def test_supply_conservation_over_random_epochs(rng):
    """Test that s_max = s_unissued + s_outstanding after every operation."""
    state = SupplyState.initial(1_000.0, 10_000.0, br_max=5.0, auc_max=50.0)
    for _ in range(50):
        state = advance_epoch(state)
        state = step_block_reward(state, float(rng.uniform(0.0, 5.0)))
        bids = rng.uniform(0.0, 10.0, size=3)
        state = apply_auction_issuance(state, float(bids.sum()), bids)
        state.validate()

        assert state.s_max == pytest.approx(state.s_unissued + state.s_outstanding)
        assert sum(state.s_minted_history) == pytest.approx(state.s_outstanding)
    assert state.t == 50
    assert len(state.s_minted_history) == 51


def test_validate_detects_broken_ledger():
    """Test that a ledger violating s_max = s_unissued + s_outstanding fails validation."""
    broken = replace(_ledger(), s_unissued=10.0)
    with pytest.raises(BoundViolation):
        broken.validate()


def test_adjust_controls_unit_ratio():
    """Test that an unchanged price leaves every control unchanged."""
    state = _ledger(collateral_ratio=1.2)
    update = adjust_controls(state, br_prev=3.0, auc_prev=10.0, p_now=1.0, p_prev=1.0)

    assert update.s_max == pytest.approx(150.0)
    assert update.br == pytest.approx(3.0)
    assert update.auc == pytest.approx(10.0)
    assert update.collateral_ratio == pytest.approx(1.2)


def test_adjust_controls_scales_with_price():
    """Test that S_max follows the price ratio."""
    state = SupplyState.initial(100.0, 1_000.0, br_max=100.0, auc_max=50.0)
    update = adjust_controls(state, br_prev=1.0, auc_prev=10.0, p_now=1.1, p_prev=1.0)

    assert update.s_max == pytest.approx(1_100.0)
    assert update.br == pytest.approx(1.1)
    assert update.auc == pytest.approx(11.0)


def test_adjust_controls_clips_collateral_ratio():
    """Test that the collateral ratio is clipped into [1, lambda_max]."""
    state = _ledger(collateral_ratio=1.2, lambda_max=2.0)
    update = adjust_controls(state, br_prev=1.0, auc_prev=1.0, p_now=2.0, p_prev=1.0)

    assert update.collateral_ratio == 1.0


def test_adjust_controls_keeps_cap_above_outstanding():
    """Test that a price crash never shrinks S_max below the outstanding supply."""
    update = adjust_controls(_ledger(), br_prev=1.0, auc_prev=1.0, p_now=0.1, p_prev=1.0)
    assert update.s_max == pytest.approx(100.0)


def test_adjust_controls_rejects_non_positive_price():
    """Test that prices must be positive."""
    with pytest.raises(InvalidParameter):
        adjust_controls(_ledger(), 1.0, 1.0, p_now=0.0, p_prev=1.0)


def test_apply_controls_rebalances_reserve():
    """Test that applying an update keeps the reserve at ratio times supply."""
    state = _ledger(collateral_ratio=1.5)
    update = adjust_controls(state, br_prev=1.0, auc_prev=1.0, p_now=1.0, p_prev=1.2)
    applied = apply_controls(state, update)

    assert applied.collateral_ratio == pytest.approx(1.8)
    assert applied.reserve == pytest.approx(180.0)
    assert applied.s_max == pytest.approx(125.0)
    assert applied.s_unissued == pytest.approx(25.0)


def test_apply_controls_without_collateral():
    """Test that algorithmic updates keep the collateral ratio."""
    state = _ledger()
    update = adjust_controls(state, br_prev=1.0, auc_prev=1.0, p_now=1.0, p_prev=1.5)
    applied = apply_controls(state, update, adjust_collateral=False)

    assert applied.collateral_ratio == 1.0


def test_rebalance_reserve_rejects_ratio_out_of_range():
    """Test that ratios above lambda_max are rejected."""
    with pytest.raises(BoundViolation):
        rebalance_reserve(_ledger(lambda_max=2.0), 2.5)


def test_depreciation_single_vintage():
    """Test that a vintage has not depreciated in its mint epoch."""
    schedule = DepreciationSchedule(d_rate=0.01, minted_by_epoch=(200.0,))
    assert outstanding_with_depreciation(schedule, 0) == pytest.approx(200.0)


def test_depreciation_after_five_epochs():
    """Test linear depreciation of one vintage."""
    schedule = DepreciationSchedule(d_rate=0.01, minted_by_epoch=(200.0,))
    assert outstanding_with_depreciation(schedule, 5) == pytest.approx(190.0)


def test_depreciation_is_capped():
    """Test that a vintage never depreciates below zero."""
    schedule = DepreciationSchedule(d_rate=0.01, minted_by_epoch=(200.0,))
    assert outstanding_with_depreciation(schedule, 150) == 0.0


def test_depreciation_over_several_vintages():
    """Test that every vintage depreciates from its own mint epoch."""
    schedule = DepreciationSchedule(d_rate=0.1, minted_by_epoch=(100.0, 50.0, 10.0))
    expected = 100.0 * (1 - 0.2) + 50.0 * (1 - 0.1) + 10.0
    assert outstanding_with_depreciation(schedule, 2) == pytest.approx(expected)


def test_depreciation_rejects_earlier_epoch():
    """Test that the evaluation epoch cannot precede the last mint."""
    schedule = DepreciationSchedule(d_rate=0.01, minted_by_epoch=(1.0, 1.0, 1.0))
    with pytest.raises(InvalidParameter):
        outstanding_with_depreciation(schedule, 1)


def test_depreciation_rate_range():
    """Test that rates outside [0, 1] are rejected."""
    with pytest.raises(InvalidParameter):
        DepreciationSchedule(d_rate=1.5, minted_by_epoch=())


def test_depreciation_without_rate_keeps_supply():
    """Test that a zero rate reproduces the minted total."""
    minted = tuple(np.linspace(1.0, 5.0, 5))
    schedule = DepreciationSchedule(d_rate=0.0, minted_by_epoch=minted)
    assert outstanding_with_depreciation(schedule, 10) == pytest.approx(sum(minted))
