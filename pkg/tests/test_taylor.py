"""Tests for the Taylor-rule economy and its rate-setting MPC."""

from __future__ import annotations

import numpy as np
import pytest

from stablecoin_admm.const import DEFAULT_TAYLOR
from stablecoin_admm.exceptions import DimensionMismatch, InvalidParameter
from stablecoin_admm.taylor import (
    TaylorHorizon,
    TaylorParams,
    is_closed_loop_stable,
    jury_margins,
    spectral_radius,
    stability_region,
    taylor_closed_loop_matrix,
    taylor_model_matrices,
    taylor_model_step,
    taylor_mpc_solve,
    taylor_objective,
    taylor_rate,
)


def _params(**overrides) -> TaylorParams:
    values = {**DEFAULT_TAYLOR, "horizon": 8}
    values.update(overrides)
    return TaylorParams(**values)


def test_closed_loop_matrix():
    """Test the closed-loop matrix for the reference coefficients."""
    matrix = taylor_closed_loop_matrix(_params())
    np.testing.assert_allclose(matrix, [[0.65, -0.25], [0.3, 1.0]])


def test_closed_loop_without_feedback_is_open_loop():
    """Test that zero feedback gives back the open-loop matrix."""
    params = _params(phi_y=0.0, phi_pi=0.0)
    A, _ = taylor_model_matrices(params)
    np.testing.assert_allclose(taylor_closed_loop_matrix(params), A)


def test_closed_loop_matches_feedback_simulation():
    """Test that u = φ_y y + φ_π π applied to (A, B) gives the closed loop."""
    params = _params()
    x = np.array([0.02, -0.01])
    u = params.phi_y * x[0] + params.phi_pi * x[1]
    np.testing.assert_allclose(
        taylor_model_step(params, x, u), taylor_closed_loop_matrix(params) @ x
    )


def test_reference_coefficients_are_stable():
    """Test the stability verdict and eigenvalue modulus of the reference rule."""
    params = _params()

    assert is_closed_loop_stable(params)
    assert spectral_radius(taylor_closed_loop_matrix(params)) == pytest.approx(
        0.851, abs=1e-3
    )


def test_weak_inflation_response_is_unstable():
    """Test that φ_π = 1 fails the strict Jury inequality."""
    params = _params(phi_pi=1.0)

    assert jury_margins(params)[2] == 0.0
    assert not is_closed_loop_stable(params)


def test_jury_test_agrees_with_eigenvalues(rng):
    """Test the Jury verdict against eigenvalue moduli on random coefficients."""
    checked = 0
    for _ in range(1000):
        params = _params(
            alpha=float(rng.uniform(0.01, 1.0)),
            rho=float(rng.uniform(0.0, 1.0)),
            zeta=float(rng.uniform(0.01, 1.0)),
            phi_y=float(rng.uniform(0.0, 3.0)),
            phi_pi=float(rng.uniform(0.0, 3.0)),
        )
        radius = spectral_radius(taylor_closed_loop_matrix(params))
        if abs(radius - 1.0) < 1e-6:
            continue
        assert is_closed_loop_stable(params) == (radius < 1.0)
        checked += 1
    assert checked > 990


def test_stability_region_frame():
    """Test the layout of the stability sweep."""
    frame = stability_region(_params(), [0.0, 0.5], [0.5, 1.5, 2.0])

    assert list(frame.columns) == ["phi_y", "phi_pi", "stable", "spectral_radius"]
    assert len(frame) == 6
    row = frame[(frame["phi_y"] == 0.5) & (frame["phi_pi"] == 1.5)].iloc[0]
    assert bool(row["stable"])
    assert not frame[frame["phi_pi"] == 0.5]["stable"].any()


def test_taylor_rate():
    """Test the nominal rate formula."""
    params = _params(r_star=0.01)
    rate = taylor_rate(params, output_gap=0.02, inflation=0.03)
    assert rate == pytest.approx(0.03 + 0.01 + 1.5 * 0.01 + 0.5 * 0.02)


def test_mpc_at_equilibrium_is_zero():
    """Test that no rate change is needed at the steady state."""
    u = taylor_mpc_solve(_params(), np.zeros(2))

    assert u.shape == (8,)
    np.testing.assert_allclose(u, 0.0, atol=1e-6)


def test_mpc_beats_perturbed_inputs(rng):
    """Test that the MPC sequence is no worse than feasible perturbations."""
    params = _params()
    x0 = np.array([0.03, 0.02])
    horizon = TaylorHorizon(r_weight=0.5, s_weight=0.3, u_prev=0.01)
    u = taylor_mpc_solve(params, x0, horizon)
    best = taylor_objective(params, x0, u, horizon)

    assert np.all(u >= -params.i_star - 1e-7)
    for _ in range(50):
        candidate = np.maximum(u + rng.normal(0.0, 0.01, size=u.size), -params.i_star)
        assert best <= taylor_objective(params, x0, candidate, horizon) + 1e-9


def test_mpc_respects_zero_lower_bound():
    """Test that a deep recession cannot push the rate below zero."""
    params = _params()
    u = taylor_mpc_solve(params, np.array([-0.5, -0.5]))
    assert u.min() >= -params.i_star - 1e-7


def test_negative_rates_improve_objective():
    """Test that dropping the lower bound can only lower the cost."""
    x0 = np.array([-0.5, -0.5])
    bounded = _params()
    unbounded = _params(allow_negative_rates=True)
    horizon = TaylorHorizon()
    u_bounded = taylor_mpc_solve(bounded, x0, horizon)
    u_free = taylor_mpc_solve(unbounded, x0, horizon)

    assert u_free.min() < -bounded.i_star
    assert taylor_objective(unbounded, x0, u_free, horizon) <= taylor_objective(
        bounded, x0, u_bounded, horizon
    ) + 1e-9


def test_move_blocking_holds_inputs():
    """Test that inputs stay constant from the blocking step on."""
    horizon = TaylorHorizon(blocking=3)
    u = taylor_mpc_solve(_params(), np.array([0.05, 0.03]), horizon)
    np.testing.assert_allclose(u[2:], u[2])


def test_mpc_rejects_bad_state_and_blocking():
    """Test argument validation of the MPC solve."""
    with pytest.raises(DimensionMismatch):
        taylor_mpc_solve(_params(), np.zeros(3))
    with pytest.raises(InvalidParameter):
        taylor_mpc_solve(_params(), np.zeros(2), TaylorHorizon(blocking=9))


def test_params_validation():
    """Test parameter range checks."""
    with pytest.raises(InvalidParameter):
        _params(beta_discount=1.0)
    with pytest.raises(InvalidParameter):
        _params(lambda_weight=0.0)
    with pytest.raises(InvalidParameter):
        _params(horizon=0)
