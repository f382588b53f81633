"""Tests for the dual consensus auction over an unreliable network."""

from __future__ import annotations

from dataclasses import replace

import numpy as np
import pandas as pd
import pytest

from stablecoin_admm.auction import (
    AuctionInstance,
    solve_welfare,
    tie_break_curvature,
    truthful_outcome,
)
from stablecoin_admm.const import MANAGER_NODE
from stablecoin_admm.consensus import (
    ManagerState,
    NetworkModel,
    UserNodeState,
    faithfulness_probe,
    initial_states,
    manager_step,
    residual_decay_slope,
    run_dual_consensus,
    run_protocol_one,
    sample_active_sets,
    user_step,
)
from stablecoin_admm.exceptions import DimensionMismatch, InvalidParameter, IterationLimit


def _consensus(instance, net, **options):
    return run_dual_consensus(
        instance.reports, instance.valuation, instance.bounds, net, **options
    )


def _user(instance, i: int = 0, q: float = 1.0, sigma: float = 1.0) -> UserNodeState:
    valuation = instance.valuation
    return UserNodeState.initial(
        instance.reports[i],
        valuation.a[i],
        valuation.b[i],
        valuation.c[i],
        instance.bounds.y_max,
        q,
        sigma,
    )


def test_reliable_network_activates_everything():
    """Test that a reliable network keeps every user and link active."""
    net = NetworkModel.reliable(3)
    users, edges = sample_active_sets(net, 1)

    assert users == frozenset({0, 1, 2})
    assert edges == frozenset({(0, MANAGER_NODE), (1, MANAGER_NODE), (2, MANAGER_NODE)})


def test_dead_links():
    """Test that p_e = 1 keeps users online but drops every link."""
    net = NetworkModel.star([1.0, 1.0], 1.0)
    users, edges = sample_active_sets(net, 7)

    assert users == frozenset({0, 1})
    assert edges == frozenset()


def test_active_sets_are_replayable():
    """Test that a round's draw depends only on (seed, round)."""
    net = NetworkModel.star([0.5, 0.5, 0.5], 0.3, seed=11)
    assert sample_active_sets(net, 4) == sample_active_sets(net, 4)


def test_pair_activity_frequency():
    """Test empirical link activity against α_i α_j (1 − p_e)."""
    net = NetworkModel.star([0.7, 0.4], 0.1, seed=3)
    draws = 20_000
    counts = np.zeros(2)
    for k in range(1, draws + 1):
        _, edges = sample_active_sets(net, k)
        for i in range(2):
            counts[i] += (i, MANAGER_NODE) in edges
    for i in range(2):
        beta = net.pair_activity(i, MANAGER_NODE)
        sigma = np.sqrt(beta * (1.0 - beta) / draws)
        assert abs(counts[i] / draws - beta) < 3.0 * sigma


def test_network_validation():
    """Test range checks of the network model."""
    with pytest.raises(InvalidParameter):
        NetworkModel.star([0.0, 1.0], 0.0)
    with pytest.raises(InvalidParameter):
        NetworkModel.star([1.0], 1.5)
    with pytest.raises(InvalidParameter):
        NetworkModel(alpha=(1.0,), p_e=0.0, edges=((3, MANAGER_NODE),))


def test_manager_dual_stays_zero_at_rest(instance_fixture):
    """Test that zero prices and edge averages leave μ at zero."""
    instance = instance_fixture("two_users.json")
    manager = ManagerState.initial(2, instance.valuation, instance.bounds, 1.0)
    stepped = manager_step(manager)

    np.testing.assert_array_equal(stepped.mu, 0.0)


def test_manager_price_update(instance_fixture, rng):
    """Test the manager's λ and projected y updates."""
    instance = instance_fixture("two_users.json")
    manager = replace(
        ManagerState.initial(2, instance.valuation, instance.bounds, 2.0),
        lam=rng.normal(size=1),
        t=rng.normal(size=(2, 1)),
    )
    stepped = manager_step(manager)
    s = 2.0 * manager.t.sum(axis=0)
    mu = manager.mu + 2.0 * 2.0 * (manager.lam - manager.t).sum(axis=0)
    y = np.clip((2.0 * s - mu) / (4.0 * 2 * 2.0 * 0.05 + 1.0), 0.0, 20.0)

    np.testing.assert_allclose(stepped.mu, mu)
    np.testing.assert_allclose(stepped.y, y)
    np.testing.assert_allclose(stepped.lam, (-y / 2.0 - mu / 2.0 + s) / 4.0)


def test_offline_user_is_unchanged(instance_fixture):
    """Test the carry-over rule for offline users."""
    user = replace(_user(instance_fixture("two_users.json")), x=np.array([1.5]))
    stepped = user_step(user, np.array([3.0]), active=False, edge_active=False)

    assert stepped.x[0] == 1.5
    np.testing.assert_array_equal(stepped.lam, user.lam)
    assert not stepped.fresh


def test_active_link_averages_prices(instance_fixture):
    """Test the edge average after a delivered message."""
    user = _user(instance_fixture("two_users.json"))
    stepped = user_step(user, np.array([0.4]), active=True, edge_active=True)

    np.testing.assert_allclose(stepped.t, (stepped.lam + 0.4) / 2.0)
    again = user_step(stepped, stepped.lam, active=True, edge_active=True)
    np.testing.assert_allclose(again.t, again.lam / 2.0 + stepped.lam / 2.0)


def test_dead_link_keeps_edge_average(instance_fixture):
    """Test that a lost message leaves t unchanged."""
    user = replace(_user(instance_fixture("two_users.json")), t=np.array([0.3]))
    stepped = user_step(user, np.array([5.0]), active=True, edge_active=False)

    assert stepped.t[0] == 0.3
    assert not stepped.fresh


def test_allocation_update_matches_grid(instance_fixture, rng):
    """Test the local (x, r) subproblem against a dense grid."""
    base = _user(instance_fixture("two_users.json"), q=0.5, sigma=2.0)
    grid = np.linspace(0.0, 10.0, 100_001)
    for _ in range(10):
        user = replace(
            base,
            mu=rng.normal(size=1),
            t=rng.normal(size=1),
            z=rng.normal(5.0, 5.0, size=1),
            d=rng.uniform(1.0, 10.0, size=1),
            fresh=False,
        )
        stepped = user_step(user, np.zeros(1), active=True, edge_active=False)
        q, sigma = user.q, user.sigma
        objective = (
            user.c[0] * grid**2
            - user.b[0] * grid
            + grid**2 / (4.0 * q)
            - (user.mu[0] / (2.0 * q) - user.t[0]) * grid
            + np.maximum(0.0, grid + sigma * user.z[0] - user.d[0]) ** 2 / (2.0 * sigma)
        )
        assert stepped.x[0] == pytest.approx(grid[int(np.argmin(objective))], abs=2e-4)
        assert stepped.r[0] == pytest.approx(
            max(0.0, -(stepped.x[0] + sigma * user.z[0] - user.d[0]))
        )


def test_linear_users_share_the_welfare_tie_break():
    """Test that user nodes carry the curvature the welfare QP adds to linear valuations."""
    instance = AuctionInstance.from_dict(
        {
            "users": [
                {"id": "lin", "x_min": 0.0, "x": 2.0, "x_max": 4.0, "c": 0.0, "b": 1.0},
                {"id": "cur", "x_min": 0.0, "x": 2.0, "x_max": 4.0, "c": 0.5},
            ],
            "kappa2": 0.05,
            "y_max": 10.0,
        }
    )
    _, users = initial_states(instance.reports, instance.valuation, instance.bounds, 1.0, 1.0)
    expected = tie_break_curvature(instance.valuation, ["lin", "cur"])

    np.testing.assert_array_equal(np.vstack([u.tie_break for u in users]), expected)
    assert users[0].tie_break[0] > 0.0
    assert users[1].tie_break[0] == 0.0


def test_reliable_network_matches_centralized(instance_fixture):
    """Test the consensus allocation against the welfare optimum."""
    instance = instance_fixture("two_users.json")
    result = _consensus(instance, NetworkModel.reliable(2))
    allocation, _, _ = solve_welfare(instance.reports, instance.valuation, instance.bounds)

    assert result.diagnostics.converged
    np.testing.assert_allclose(result.allocation, allocation, atol=1e-3)
    lam_users = np.vstack([u.lam for u in result.users])
    assert np.max(np.abs(lam_users - result.lam)) <= np.sqrt(1e-8) * 2.0


def test_single_user_reaches_standalone(instance_fixture):
    """Test that a single bidder converges to its own peak and pays the cost."""
    instance = instance_fixture("single_user.json")
    outcome = run_protocol_one(
        instance.reports, instance.valuation, instance.bounds, NetworkModel.reliable(1)
    )

    assert outcome.allocation[0, 0] == pytest.approx(2.0, abs=1e-3)
    assert outcome.payments[0, 0] == pytest.approx(outcome.cost[0])


def test_protocol_payments_match_auction(instance_fixture):
    """Test decentralised payments against the centralized mechanism."""
    instance = instance_fixture("two_users.json")
    outcome = run_protocol_one(
        instance.reports, instance.valuation, instance.bounds, NetworkModel.reliable(2)
    )
    reference = truthful_outcome(instance)

    np.testing.assert_allclose(outcome.payments, reference.payments, atol=1e-3)
    np.testing.assert_allclose(outcome.issuance, reference.issuance, atol=1e-3)


@pytest.mark.slow
def test_unreliable_network_reaches_same_allocation(instance_fixture):
    """Test that lossy links and offline users only slow the iteration down."""
    instance = instance_fixture("four_users_two_slots.json")
    assert instance.valuation.slots == 2
    reliable = _consensus(instance, NetworkModel.reliable(4))
    results = [
        _consensus(instance, NetworkModel.star([0.7] * 4, 0.1, seed=seed)) for seed in range(20)
    ]
    mean_allocation = np.mean([r.allocation for r in results], axis=0)

    np.testing.assert_allclose(mean_allocation, reliable.allocation, atol=1e-2)
    assert min(r.diagnostics.iterations for r in results) > reliable.diagnostics.iterations


@pytest.mark.slow
def test_unreliable_network_residual_decay(instance_fixture):
    """Test the 1/k disagreement trend with offline users and lossy links."""
    instance = instance_fixture("four_users_two_slots.json")
    traces = []
    for seed in range(20):
        net = NetworkModel.star([0.7] * 4, 0.1, seed=seed)
        with pytest.raises(IterationLimit) as err:
            _consensus(instance, net, eps1=-1.0, eps2=-1.0, max_iters=320)
        traces.append(err.value.result.diagnostics.e1)

    assert residual_decay_slope(np.mean(traces, axis=0)) <= -0.8


def test_identical_seeds_give_identical_traces(instance_fixture):
    """Test bitwise determinism of the residual trace."""
    instance = instance_fixture("two_users.json")
    net = NetworkModel.star([0.8, 0.9], 0.2, seed=5)
    first = _consensus(instance, net, max_iters=20_000)
    second = _consensus(instance, net, max_iters=20_000)

    pd.testing.assert_frame_equal(first.diagnostics.to_frame(), second.diagnostics.to_frame())
    np.testing.assert_array_equal(first.allocation, second.allocation)


def test_residual_decay(instance_fixture):
    """Test that the disagreement decays at least like 1/k."""
    instance = instance_fixture("four_users.json")
    with pytest.raises(IterationLimit) as err:
        _consensus(instance, NetworkModel.reliable(4), eps1=-1.0, eps2=-1.0, max_iters=320)
    e1 = err.value.result.diagnostics.e1

    assert residual_decay_slope(e1) <= -0.8


def test_decay_slope_needs_rounds():
    """Test that a short trace cannot be fitted."""
    with pytest.raises(InvalidParameter):
        residual_decay_slope(np.ones(15))


def test_iteration_limit_carries_partial_result(instance_fixture):
    """Test that the round cap exposes the last iterate."""
    instance = instance_fixture("two_users.json")
    with pytest.raises(IterationLimit) as err:
        _consensus(instance, NetworkModel.reliable(2), max_iters=2)
    assert err.value.result.diagnostics.iterations == 2

    with pytest.raises(IterationLimit) as err:
        run_protocol_one(
            instance.reports,
            instance.valuation,
            instance.bounds,
            NetworkModel.reliable(2),
            max_iters=2,
        )
    assert err.value.result.iterations == 2


def test_network_size_must_match(instance_fixture):
    """Test that every report needs a network node."""
    instance = instance_fixture("two_users.json")
    with pytest.raises(DimensionMismatch):
        _consensus(instance, NetworkModel.reliable(3))


@pytest.mark.slow
def test_biased_prices_do_not_pay(instance_fixture):
    """Test that biasing λ_i broadcasts never raises the deviator's utility."""
    instance = instance_fixture("two_users.json")
    net = NetworkModel.reliable(2)
    for i in range(2):
        gains = faithfulness_probe(instance, net, i, [-0.5, -0.1, 0.1, 0.5])
        assert np.all(gains <= 1e-6)


def test_trace_csv(instance_fixture, tmp_path):
    """Test the per-round trace file."""
    instance = instance_fixture("two_users.json")
    result = _consensus(instance, NetworkModel.star([0.9, 0.9], 0.1, seed=2))
    path = tmp_path / "trace.csv"
    result.diagnostics.write_trace(path)
    frame = pd.read_csv(path)

    assert list(frame.columns) == ["iteration", "e1", "e2", "active_users", "active_edges"]
    assert len(frame) == result.diagnostics.iterations
