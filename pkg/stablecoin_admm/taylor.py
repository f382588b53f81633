"""Taylor-rule economy, closed-loop stability and rate-setting MPC.

State x = (y − y*, π − π*) holds the output gap and the inflation gap; the
input u = i − i* is the deviation of the nominal short-term rate from its
equilibrium.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
import numpy.typing as npt
import pandas as pd

from .exceptions import DimensionMismatch, InvalidParameter
from .qp import solve_qp

_LOGGER = logging.getLogger(__name__)


@dataclass(frozen=True)
class TaylorParams:
    """Coefficients of the two-equation economy and its Taylor rule."""

    alpha: float
    rho: float
    zeta: float
    phi_y: float
    phi_pi: float
    i_star: float
    pi_star: float
    r_star: float
    beta_discount: float
    lambda_weight: float
    horizon: int
    allow_negative_rates: bool = False

    def __post_init__(self) -> None:
        if not 0.0 < self.beta_discount < 1.0:
            raise InvalidParameter("beta_discount must lie in (0, 1)")
        if not 0.0 < self.lambda_weight < 1.0:
            raise InvalidParameter("lambda_weight must lie in (0, 1)")
        if self.horizon < 1:
            raise InvalidParameter("horizon must be at least 1")

    @property
    def state_weight(self) -> np.ndarray:
        """Q = diag(1 − λ, λ) trading output gap against inflation gap."""
        return np.diag([1.0 - self.lambda_weight, self.lambda_weight])


@dataclass(frozen=True)
class TaylorHorizon:
    """Penalties and structure of the rate-setting MPC problem.

    Attributes:
        r_weight: R, the rate-level penalty enters as R²u²
        s_weight: S, the rate-change penalty enters as S²δu²
        blocking: m, inputs are held constant from step m − 1 on
        u_prev: Rate deviation applied in the previous period
        terminal_weight: Q̄, defaults to Q
    """

    r_weight: float = 1.0
    s_weight: float = 0.0
    blocking: int | None = None
    u_prev: float = 0.0
    terminal_weight: np.ndarray | None = None


def taylor_rate(params: TaylorParams, output_gap: float, inflation: float) -> float:
    """Nominal rate prescribed by the Taylor rule."""
    return (
        inflation
        + params.r_star
        + params.phi_pi * (inflation - params.pi_star)
        + params.phi_y * output_gap
    )


def taylor_model_matrices(params: TaylorParams) -> tuple[np.ndarray, np.ndarray]:
    """Open-loop (A, B) of the output-gap/inflation model."""
    A = np.array([[params.rho, params.zeta], [params.alpha, 1.0]])
    B = np.array([[-params.zeta], [0.0]])
    return A, B


def taylor_model_step(
    params: TaylorParams,
    x: npt.ArrayLike,
    u: float,
    shock: npt.ArrayLike | None = None,
) -> np.ndarray:
    """Advance the economy by one period under rate deviation u."""
    A, B = taylor_model_matrices(params)
    state = np.asarray(x, dtype=float)
    nxt = A @ state + B[:, 0] * u
    if shock is not None:
        nxt = nxt + np.asarray(shock, dtype=float)
    return nxt


def taylor_closed_loop_matrix(params: TaylorParams) -> np.ndarray:
    """A' = A + Bcᵀ with the Taylor-rule feedback c = (φ_y, φ_π)."""
    return np.array(
        [
            [params.rho - params.zeta * params.phi_y, params.zeta - params.zeta * params.phi_pi],
            [params.alpha, 1.0],
        ]
    )


def jury_margins(params: TaylorParams) -> np.ndarray:
    """Left-hand sides of the three Jury inequalities (all must be > 0)."""
    a, r, z = params.alpha, params.rho, params.zeta
    feedback = a * z * (params.phi_pi - 1.0)
    return np.array(
        [
            2.0 + 2.0 * r - 2.0 * z * params.phi_y + feedback,
            1.0 - r + z * params.phi_y - feedback,
            feedback,
        ]
    )


def is_closed_loop_stable(params: TaylorParams) -> bool:
    """Whether both closed-loop eigenvalues lie strictly inside the unit disk."""
    return bool(np.all(jury_margins(params) > 0.0))


def spectral_radius(matrix: npt.ArrayLike) -> float:
    return float(np.max(np.abs(np.linalg.eigvals(np.asarray(matrix, dtype=float)))))


def stability_region(
    params: TaylorParams,
    phi_y_grid: npt.ArrayLike,
    phi_pi_grid: npt.ArrayLike,
) -> pd.DataFrame:
    """Evaluate closed-loop stability over a (φ_y, φ_π) grid.

    Returns:
        One row per grid point with columns phi_y, phi_pi, stable and
        spectral_radius
    """
    rows = []
    for phi_pi in np.asarray(phi_pi_grid, dtype=float):
        for phi_y in np.asarray(phi_y_grid, dtype=float):
            candidate = TaylorParams(
                alpha=params.alpha,
                rho=params.rho,
                zeta=params.zeta,
                phi_y=float(phi_y),
                phi_pi=float(phi_pi),
                i_star=params.i_star,
                pi_star=params.pi_star,
                r_star=params.r_star,
                beta_discount=params.beta_discount,
                lambda_weight=params.lambda_weight,
                horizon=params.horizon,
                allow_negative_rates=params.allow_negative_rates,
            )
            rows.append(
                {
                    "phi_y": float(phi_y),
                    "phi_pi": float(phi_pi),
                    "stable": is_closed_loop_stable(candidate),
                    "spectral_radius": spectral_radius(
                        taylor_closed_loop_matrix(candidate)
                    ),
                }
            )
    return pd.DataFrame(rows, columns=["phi_y", "phi_pi", "stable", "spectral_radius"])


def _blocking_matrix(horizon: int, blocking: int) -> np.ndarray:
    T = np.zeros((horizon, blocking))
    for k in range(horizon):
        T[k, min(k, blocking - 1)] = 1.0
    return T


def _condensed_cost(
    params: TaylorParams, x0: np.ndarray, horizon_data: TaylorHorizon
) -> tuple[np.ndarray, np.ndarray]:
    """Hessian H and gradient f of J(u) = uᵀHu + 2fᵀu + const."""
    N = params.horizon
    A, B = taylor_model_matrices(params)
    Q = params.state_weight
    Q_bar = Q if horizon_data.terminal_weight is None else np.asarray(horizon_data.terminal_weight)
    discounts = params.beta_discount ** np.arange(N + 1)

    # x̂_k = Φ_k x0 + Γ_k u for k = 0..N
    Phi = np.zeros((N + 1, 2, 2))
    Gamma = np.zeros((N + 1, 2, N))
    Phi[0] = np.eye(2)
    for k in range(N):
        Phi[k + 1] = A @ Phi[k]
        Gamma[k + 1] = A @ Gamma[k]
        Gamma[k + 1][:, k] += B[:, 0]

    H = np.zeros((N, N))
    f = np.zeros(N)
    for k in range(N + 1):
        weight = discounts[k] * (Q_bar if k == N else Q)
        H += Gamma[k].T @ weight @ Gamma[k]
        f += Gamma[k].T @ weight @ (Phi[k] @ x0)

    H += np.diag(discounts[:N] * horizon_data.r_weight**2)

    # δu_k = u_k − u_{k−1}, with u_{−1} = u_prev
    D = np.eye(N) - np.eye(N, k=-1)
    offset = np.zeros(N)
    offset[0] = horizon_data.u_prev
    S_diag = np.diag(discounts[:N] * horizon_data.s_weight**2)
    H += D.T @ S_diag @ D
    f -= D.T @ S_diag @ offset
    return H, f


def taylor_objective(
    params: TaylorParams,
    x0: npt.ArrayLike,
    u: npt.ArrayLike,
    horizon_data: TaylorHorizon,
) -> float:
    """Discounted MPC objective of an input sequence, evaluated by simulation."""
    Q = params.state_weight
    Q_bar = Q if horizon_data.terminal_weight is None else np.asarray(horizon_data.terminal_weight)
    beta = params.beta_discount
    inputs = np.asarray(u, dtype=float)
    x = np.asarray(x0, dtype=float)
    previous = horizon_data.u_prev
    total = 0.0
    for k, u_k in enumerate(inputs):
        total += beta**k * (
            x @ Q @ x
            + horizon_data.r_weight**2 * u_k**2
            + horizon_data.s_weight**2 * (u_k - previous) ** 2
        )
        x = taylor_model_step(params, x, float(u_k))
        previous = u_k
    total += beta ** len(inputs) * (x @ Q_bar @ x)
    return float(total)


def taylor_mpc_solve(
    params: TaylorParams,
    x0: npt.ArrayLike,
    horizon_data: TaylorHorizon | None = None,
) -> np.ndarray:
    """Optimal rate-deviation sequence over the MPC horizon.

    The zero lower bound u ≥ −i* is imposed unless negative rates are
    allowed; the first element is the rate change to apply.

    Args:
        params: Economy and objective parameters
        x0: Current (output gap, inflation gap)
        horizon_data: Penalties, move blocking and previous input

    Returns:
        Input sequence of length params.horizon

    Raises:
        DimensionMismatch: If x0 is not a 2-vector
        InvalidParameter: If the blocking length is outside [1, horizon]
    """
    horizon_data = horizon_data or TaylorHorizon()
    state = np.asarray(x0, dtype=float)
    if state.shape != (2,):
        raise DimensionMismatch(f"x0 must be a 2-vector, got shape {state.shape}")
    N = params.horizon
    blocking = N if horizon_data.blocking is None else horizon_data.blocking
    if not 1 <= blocking <= N:
        raise InvalidParameter(f"blocking={blocking} must lie in [1, {N}]")

    H, f = _condensed_cost(params, state, horizon_data)
    T = _blocking_matrix(N, blocking)
    H_v = T.T @ H @ T
    f_v = T.T @ f

    lower = np.full(blocking, -np.inf if params.allow_negative_rates else -params.i_star)
    upper = np.full(blocking, np.inf)
    solution = solve_qp(2.0 * H_v, 2.0 * f_v, np.eye(blocking), lower, upper)
    u = T @ solution.x
    _LOGGER.debug("Taylor MPC applied rate deviation %s", u[0])
    return u
