"""Scenario-based mean-variance MPC and its two-block ADMM decomposition.

Every scenario i carries its own input sequence u^i, trajectory x^i and
controlled outputs z^i = G u^i + h^i. The exchange-rate functional of a
scenario is φ^i = 𝟙ᵀz^i = gᵀu^i + c^i, bounded from above by the epigraph
variable ψ^i. The first M + 1 inputs are shared by all scenarios.

The ADMM form splits the variables into

    y1 = (ǔ, x, z, ψ̌, μ̌)   subject to the dynamics and the epigraph
    y2 = (u, ψ, μ)          subject to the input box and non-anticipativity

coupled by the rows μ̌ − 𝟙ᵀψ/S, μ̌ − μ, ǔ − u and ψ̌ − ψ.
"""

from __future__ import annotations

import json
import logging
from collections.abc import Callable
from dataclasses import dataclass, field, replace
from typing import Any

import numpy as np
import numpy.typing as npt
import scipy.linalg
import scipy.sparse as sparse

from .const import (
    DEFAULT_ADMM_MAX_ITERS,
    DEFAULT_EPS_DUAL,
    DEFAULT_EPS_PRIMAL,
    DEFAULT_RESIDUAL_BALANCING,
    DEFAULT_RHO,
    RESIDUAL_BALANCE_FACTOR,
    RESIDUAL_BALANCE_RATIO,
    SOLVER_ADMM,
    SOLVER_CENTRALIZED,
)
from .exceptions import (
    DegenerateScenarioSet,
    DimensionMismatch,
    InfeasibleProblem,
    InvalidParameter,
    IterationLimit,
    SubproblemFailure,
)
from .qp import solve_qp

_LOGGER = logging.getLogger(__name__)


def _matrix(value: npt.ArrayLike, name: str) -> np.ndarray:
    array = np.atleast_2d(np.asarray(value, dtype=float))
    if array.ndim != 2:
        raise DimensionMismatch(f"{name} must be a matrix, got {array.ndim} dimensions")
    return array


@dataclass(frozen=True)
class LinearSystem:
    """x_{k+1} = A x_k + B u_k + w_k with outputs y_k = C_y x_k, z_k = C_z x_k."""

    A: np.ndarray
    B: np.ndarray
    C_z: np.ndarray
    C_y: np.ndarray | None = None

    def __post_init__(self) -> None:
        A = _matrix(self.A, "A")
        B = _matrix(self.B, "B")
        C_z = _matrix(self.C_z, "C_z")
        C_y = np.eye(A.shape[0]) if self.C_y is None else _matrix(self.C_y, "C_y")
        n_x = A.shape[0]
        if A.shape != (n_x, n_x):
            raise DimensionMismatch(f"A must be square, got {A.shape}")
        if B.shape[0] != n_x:
            raise DimensionMismatch(f"B must have {n_x} rows, got {B.shape[0]}")
        if C_z.shape[1] != n_x:
            raise DimensionMismatch(f"C_z must have {n_x} columns, got {C_z.shape[1]}")
        if C_y.shape[1] != n_x:
            raise DimensionMismatch(f"C_y must have {n_x} columns, got {C_y.shape[1]}")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)
        object.__setattr__(self, "C_z", C_z)
        object.__setattr__(self, "C_y", C_y)

    @property
    def dims(self) -> tuple[int, int, int, int]:
        """(n_x, n_u, n_y, n_z)."""
        assert self.C_y is not None
        return self.A.shape[0], self.B.shape[1], self.C_y.shape[0], self.C_z.shape[0]

    def to_dict(self) -> dict[str, Any]:
        assert self.C_y is not None
        return {
            "A": self.A.tolist(),
            "B": self.B.tolist(),
            "C_y": self.C_y.tolist(),
            "C_z": self.C_z.tolist(),
        }


@dataclass(frozen=True)
class ScenarioOcp:
    """Mean-variance optimal control problem over S noise scenarios.

    Attributes:
        sys: Linear system shared by every scenario
        x0: Measured initial state
        horizon: Prediction horizon N
        noise_draws: Array of shape (S, N, n_x)
        lambda_tradeoff: Weight λ of the mean against the variance
        u_lower: Per-step lower input bounds, shape (N, n_u)
        u_upper: Per-step upper input bounds, shape (N, n_u)
        consensus_horizon: Inputs 0..M are identical across scenarios
        tracking_weight: Quadratic weight on z − z_reference
        z_reference: Output reference, shape (N, n_z)
        input_weight: Quadratic weight on the inputs
    """

    sys: LinearSystem
    x0: np.ndarray
    horizon: int
    noise_draws: np.ndarray
    lambda_tradeoff: float
    u_lower: np.ndarray
    u_upper: np.ndarray
    consensus_horizon: int = 0
    tracking_weight: float = 0.0
    z_reference: np.ndarray | float = 0.0
    input_weight: float = 0.0

    def __post_init__(self) -> None:
        n_x, n_u, _, n_z = self.sys.dims
        N = self.horizon
        if N < 1:
            raise InvalidParameter("horizon must be at least 1")
        x0 = np.asarray(self.x0, dtype=float).reshape(-1)
        if x0.size != n_x:
            raise DimensionMismatch(f"x0 must have {n_x} entries, got {x0.size}")
        noise = np.asarray(self.noise_draws, dtype=float)
        if noise.ndim != 3 or noise.shape[1:] != (N, n_x):
            raise DimensionMismatch(
                f"noise_draws must have shape (S, {N}, {n_x}), got {noise.shape}"
            )
        if noise.shape[0] < 2:
            raise DegenerateScenarioSet(
                f"At least two scenarios are required, got {noise.shape[0]}"
            )
        if not 0.0 <= self.lambda_tradeoff <= 1.0:
            raise InvalidParameter("lambda_tradeoff must lie in [0, 1]")
        if not 0 <= self.consensus_horizon <= N:
            raise InvalidParameter(
                f"consensus_horizon={self.consensus_horizon} must lie in [0, {N}]"
            )
        if self.tracking_weight < 0.0 or self.input_weight < 0.0:
            raise InvalidParameter("tracking_weight and input_weight must be non-negative")
        object.__setattr__(self, "x0", x0)
        object.__setattr__(self, "noise_draws", noise)
        object.__setattr__(
            self, "u_lower", np.broadcast_to(np.asarray(self.u_lower, float), (N, n_u)).copy()
        )
        object.__setattr__(
            self, "u_upper", np.broadcast_to(np.asarray(self.u_upper, float), (N, n_u)).copy()
        )
        object.__setattr__(
            self,
            "z_reference",
            np.broadcast_to(np.asarray(self.z_reference, float), (N, n_z)).copy(),
        )

    @property
    def scenario_count(self) -> int:
        return int(self.noise_draws.shape[0])

    @property
    def shared_steps(self) -> int:
        """Number of leading inputs bound by non-anticipativity."""
        return min(self.consensus_horizon + 1, self.horizon)

    @property
    def lambda_tilde(self) -> float:
        """λ̃ = (1 − λ)/(S − 1)."""
        return (1.0 - self.lambda_tradeoff) / (self.scenario_count - 1)

    def to_dict(self) -> dict[str, Any]:
        return {
            "sys": self.sys.to_dict(),
            "x0": self.x0.tolist(),
            "horizon": self.horizon,
            "noise_draws": self.noise_draws.tolist(),
            "lambda_tradeoff": self.lambda_tradeoff,
            "u_lower": np.asarray(self.u_lower).tolist(),
            "u_upper": np.asarray(self.u_upper).tolist(),
            "consensus_horizon": self.consensus_horizon,
            "tracking_weight": self.tracking_weight,
            "z_reference": np.asarray(self.z_reference).tolist(),
            "input_weight": self.input_weight,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> ScenarioOcp:
        """Rebuild an instance from the row-major layout of to_dict()."""
        sys_data = data["sys"]
        sys = LinearSystem(
            A=np.asarray(sys_data["A"], dtype=float),
            B=np.asarray(sys_data["B"], dtype=float),
            C_z=np.asarray(sys_data["C_z"], dtype=float),
            C_y=np.asarray(sys_data["C_y"], dtype=float) if "C_y" in sys_data else None,
        )
        return cls(
            sys=sys,
            x0=np.asarray(data["x0"], dtype=float),
            horizon=int(data["horizon"]),
            noise_draws=np.asarray(data["noise_draws"], dtype=float),
            lambda_tradeoff=float(data["lambda_tradeoff"]),
            u_lower=np.asarray(data["u_lower"], dtype=float),
            u_upper=np.asarray(data["u_upper"], dtype=float),
            consensus_horizon=int(data.get("consensus_horizon", 0)),
            tracking_weight=float(data.get("tracking_weight", 0.0)),
            z_reference=np.asarray(data.get("z_reference", 0.0), dtype=float),
            input_weight=float(data.get("input_weight", 0.0)),
        )


@dataclass(frozen=True)
class OcpSolution:
    """Optimal inputs of every scenario with the epigraph values."""

    u: np.ndarray
    psi: np.ndarray
    objective: float

    @property
    def first_input(self) -> np.ndarray:
        """The input applied at the current step, common to all scenarios."""
        return self.u[0, 0]


def simulate_scenario(
    sys: LinearSystem,
    x0: npt.ArrayLike,
    u: npt.ArrayLike,
    w: npt.ArrayLike,
) -> tuple[np.ndarray, np.ndarray]:
    """Roll the linear system forward over one scenario.

    Args:
        sys: Linear system
        x0: Initial state
        u: Inputs of shape (N, n_u)
        w: Noise of shape (N, n_x)

    Returns:
        States of shape (N + 1, n_x) and outputs z_1..z_N of shape (N, n_z)

    Raises:
        DimensionMismatch: If the sequences disagree in length or width
    """
    n_x, n_u, _, _ = sys.dims
    state = np.asarray(x0, dtype=float).reshape(-1)
    inputs = np.asarray(u, dtype=float)
    noise = np.asarray(w, dtype=float)
    if inputs.ndim == 1:
        inputs = inputs.reshape(-1, n_u)
    if noise.ndim == 1:
        noise = noise.reshape(-1, n_x)
    if state.size != n_x:
        raise DimensionMismatch(f"x0 must have {n_x} entries, got {state.size}")
    if inputs.shape[1] != n_u or noise.shape[1] != n_x:
        raise DimensionMismatch("Input or noise width does not match the system")
    if inputs.shape[0] != noise.shape[0]:
        raise DimensionMismatch(
            f"Got {inputs.shape[0]} inputs but {noise.shape[0]} noise vectors"
        )
    N = inputs.shape[0]
    x = np.empty((N + 1, n_x))
    x[0] = state
    for k in range(N):
        x[k + 1] = sys.A @ x[k] + sys.B @ inputs[k] + noise[k]
    z = x[1:] @ sys.C_z.T
    return x, z


def exchange_rate_cost(prices: npt.ArrayLike) -> float:
    """Cumulative exchange rate φ over the horizon."""
    return float(np.sum(np.asarray(prices, dtype=float)))


def mean_variance_objective(psi: npt.ArrayLike, lambda_tradeoff: float) -> float:
    """λ·mean + (1 − λ)·unbiased variance of the scenario costs.

    Raises:
        DegenerateScenarioSet: If fewer than two scenario costs are given
    """
    values = np.asarray(psi, dtype=float).reshape(-1)
    if values.size < 2:
        raise DegenerateScenarioSet(
            f"At least two scenarios are required, got {values.size}"
        )
    return float(
        lambda_tradeoff * values.mean() + (1.0 - lambda_tradeoff) * values.var(ddof=1)
    )


@dataclass(frozen=True)
class StackedDynamics:
    """Horizon-stacked matrices of one scenario.

    x = Ã x0 + B̃ u + w̃ and z = C̃ x, so z = G u + h with G = C̃B̃.
    """

    A_tilde: np.ndarray
    B_tilde: np.ndarray
    C_tilde: np.ndarray
    w_tilde: np.ndarray
    G: np.ndarray
    h: np.ndarray

    @property
    def phi_gradient(self) -> np.ndarray:
        """g = Gᵀ𝟙."""
        return self.G.sum(axis=0)

    @property
    def phi_offset(self) -> np.ndarray:
        """c^i = 𝟙ᵀh^i for every scenario."""
        return self.h.sum(axis=1)


def stack_dynamics(ocp: ScenarioOcp) -> StackedDynamics:
    """Condense the scenario dynamics over the horizon."""
    sys = ocp.sys
    n_x, n_u, _, n_z = sys.dims
    N = ocp.horizon
    powers = [np.eye(n_x)]
    for _ in range(N):
        powers.append(sys.A @ powers[-1])

    A_tilde = np.vstack(powers)
    B_tilde = np.zeros(((N + 1) * n_x, N * n_u))
    E = np.zeros(((N + 1) * n_x, N * n_x))
    for k in range(1, N + 1):
        for j in range(k):
            rows = slice(k * n_x, (k + 1) * n_x)
            B_tilde[rows, j * n_u : (j + 1) * n_u] = powers[k - 1 - j] @ sys.B
            E[rows, j * n_x : (j + 1) * n_x] = powers[k - 1 - j]

    C_tilde = np.zeros((N * n_z, (N + 1) * n_x))
    for k in range(1, N + 1):
        C_tilde[(k - 1) * n_z : k * n_z, k * n_x : (k + 1) * n_x] = sys.C_z

    S = ocp.scenario_count
    w_tilde = ocp.noise_draws.reshape(S, N * n_x) @ E.T
    free_states = A_tilde @ ocp.x0 + w_tilde
    G = C_tilde @ B_tilde
    h = free_states @ C_tilde.T
    return StackedDynamics(A_tilde, B_tilde, C_tilde, w_tilde, G, h)


def consensus_matrix(ocp: ScenarioOcp) -> sparse.csr_matrix:
    """L̃ with L̃u = 0 iff the shared inputs agree across scenarios.

    u is stacked scenario by scenario; every row ties one shared input
    component of scenario i ≥ 1 to the same component of scenario 0.
    """
    _, n_u, _, _ = ocp.sys.dims
    S, N = ocp.scenario_count, ocp.horizon
    width = N * n_u
    shared = ocp.shared_steps * n_u
    rows, cols, vals = [], [], []
    row = 0
    for i in range(1, S):
        for j in range(shared):
            rows += [row, row]
            cols += [j, i * width + j]
            vals += [-1.0, 1.0]
            row += 1
    return sparse.csr_matrix((vals, (rows, cols)), shape=(row, S * width))


def _scenario_inputs(ocp: ScenarioOcp, u: npt.ArrayLike) -> np.ndarray:
    _, n_u, _, _ = ocp.sys.dims
    S, N = ocp.scenario_count, ocp.horizon
    inputs = np.asarray(u, dtype=float)
    if inputs.shape == (N, n_u) or inputs.shape == (N * n_u,):
        inputs = np.broadcast_to(inputs.reshape(N, n_u), (S, N, n_u))
    if inputs.size != S * N * n_u:
        raise DimensionMismatch(
            f"Inputs must have shape ({S}, {N}, {n_u}) or ({N}, {n_u}), got {inputs.shape}"
        )
    return inputs.reshape(S, N, n_u)


def scenario_costs(ocp: ScenarioOcp, u: npt.ArrayLike) -> np.ndarray:
    """Exchange-rate functional φ^i of every scenario under the given inputs."""
    stacked = stack_dynamics(ocp)
    flat = _scenario_inputs(ocp, u).reshape(ocp.scenario_count, -1)
    return flat @ stacked.phi_gradient + stacked.phi_offset


def ocp_objective(
    ocp: ScenarioOcp, u: npt.ArrayLike, psi: npt.ArrayLike | None = None
) -> float:
    """Objective of the OCP at inputs u and epigraph values psi.

    When psi is omitted the epigraph is taken tight, ψ^i = φ^i.
    """
    stacked = stack_dynamics(ocp)
    S = ocp.scenario_count
    flat = _scenario_inputs(ocp, u).reshape(S, -1)
    z = flat @ stacked.G.T + stacked.h
    values = (
        z.sum(axis=1) if psi is None else np.asarray(psi, dtype=float).reshape(-1)
    )
    mu = values.mean()
    zref = np.asarray(ocp.z_reference).reshape(-1)
    return float(
        ocp.lambda_tradeoff * mu
        + ocp.lambda_tilde * np.sum((values - mu) ** 2)
        + ocp.tracking_weight / S * np.sum((z - zref) ** 2)
        + ocp.input_weight / S * np.sum(flat**2)
    )


def _check_box(ocp: ScenarioOcp) -> None:
    if np.any(ocp.u_lower > ocp.u_upper):
        raise InfeasibleProblem("Input box is empty (u_lower > u_upper)")


def solve_ocp_centralized(ocp: ScenarioOcp) -> OcpSolution:
    """Solve the scenario OCP as one quadratic program.

    Decision vector (u^1..u^S, ψ, μ) with the non-anticipativity rows, the
    epigraph rows ψ^i − gᵀu^i ≥ c^i, the averaging row and the input box.

    Raises:
        InfeasibleProblem: If the input box is empty
        SubproblemFailure: If the problem is unbounded
    """
    _check_box(ocp)
    stacked = stack_dynamics(ocp)
    _, n_u, _, _ = ocp.sys.dims
    S, N = ocp.scenario_count, ocp.horizon
    width = N * n_u
    n_u_total = S * width
    lam, lam_t = ocp.lambda_tradeoff, ocp.lambda_tilde
    zref = np.asarray(ocp.z_reference).reshape(-1)

    kappa = 2.0 * ocp.tracking_weight / S
    u_block = kappa * stacked.G.T @ stacked.G + 2.0 * ocp.input_weight / S * np.eye(width)
    P_u = sparse.kron(sparse.eye(S), sparse.csr_matrix(u_block))
    ones = np.ones((S, 1))
    P_psi_mu = 2.0 * lam_t * np.block([[np.eye(S), -ones], [-ones.T, np.array([[S]])]])
    P = sparse.block_diag([P_u, sparse.csr_matrix(P_psi_mu)], format="csc")

    q_u = (kappa * (stacked.h - zref) @ stacked.G).reshape(-1)
    q = np.concatenate([q_u, np.zeros(S), [lam]])

    L = consensus_matrix(ocp)
    n_vars = n_u_total + S + 1
    zeros_tail = sparse.csr_matrix((L.shape[0], S + 1))
    consensus_rows = sparse.hstack([L, zeros_tail])

    epigraph_u = sparse.kron(sparse.eye(S), sparse.csr_matrix(-stacked.phi_gradient))
    epigraph_rows = sparse.hstack(
        [epigraph_u, sparse.eye(S), sparse.csr_matrix((S, 1))]
    )
    averaging_row = sparse.csr_matrix(
        np.concatenate([np.zeros(n_u_total), -np.ones(S) / S, [1.0]])
    )
    box_rows = sparse.hstack(
        [sparse.eye(n_u_total), sparse.csr_matrix((n_u_total, S + 1))]
    )
    A = sparse.vstack(
        [consensus_rows, epigraph_rows, averaging_row, box_rows], format="csc"
    )
    assert A.shape[1] == n_vars

    u_lower = np.tile(ocp.u_lower.reshape(-1), S)
    u_upper = np.tile(ocp.u_upper.reshape(-1), S)
    lower = np.concatenate([np.zeros(L.shape[0]), stacked.phi_offset, [0.0], u_lower])
    upper = np.concatenate([np.zeros(L.shape[0]), np.full(S, np.inf), [0.0], u_upper])

    solution = solve_qp(P, q, A, lower, upper)
    u = solution.x[:n_u_total].reshape(S, N, n_u)
    psi = solution.x[n_u_total : n_u_total + S]
    return OcpSolution(u=u, psi=psi, objective=ocp_objective(ocp, u, psi))


@dataclass(frozen=True)
class _Factors:
    """Cholesky factors of the constant ADMM subproblem matrices."""

    rho: float
    inactive: tuple[np.ndarray, bool]
    active: tuple[np.ndarray, bool]
    psi_mu: tuple[np.ndarray, bool]


def _factorize(ocp: ScenarioOcp, G: np.ndarray, g: np.ndarray, rho: float) -> _Factors:
    S = ocp.scenario_count
    width = G.shape[1]
    kappa = 2.0 * ocp.tracking_weight / S
    base = rho * np.eye(width) + kappa * G.T @ G
    lam_t = ocp.lambda_tilde
    ones = np.ones((S, 1))
    K = np.block(
        [
            [(2.0 * lam_t + rho) * np.eye(S) + rho / S**2 * (ones @ ones.T), -2.0 * lam_t * ones],
            [-2.0 * lam_t * ones.T, np.array([[2.0 * S * lam_t + rho]])],
        ]
    )
    try:
        return _Factors(
            rho=rho,
            inactive=scipy.linalg.cho_factor(base),
            active=scipy.linalg.cho_factor(base + rho * np.outer(g, g)),
            psi_mu=scipy.linalg.cho_factor(K),
        )
    except np.linalg.LinAlgError as err:
        raise SubproblemFailure(f"ADMM subproblem matrix is singular: {err}") from err


@dataclass(frozen=True)
class AdmmSplit:
    """State of the two-block ADMM iteration.

    The y1 block is (u_check, x, z, psi_check, mu_check) and the y2 block is
    (u, psi, mu); eta is the scaled dual of the coupling rows.
    """

    ocp: ScenarioOcp
    stacked: StackedDynamics
    L_tilde: sparse.csr_matrix
    M1: sparse.csr_matrix
    M2: sparse.csr_matrix
    g: np.ndarray
    H: sparse.csr_matrix
    rho: float
    u_check: np.ndarray
    x: np.ndarray
    z: np.ndarray
    psi_check: np.ndarray
    mu_check: float
    u: np.ndarray
    psi: np.ndarray
    mu: float
    u_prev: np.ndarray
    psi_prev: np.ndarray
    mu_prev: float
    eta: np.ndarray
    factors: _Factors = field(repr=False, compare=False)

    @property
    def y1(self) -> np.ndarray:
        return np.concatenate(
            [
                self.u_check.reshape(-1),
                self.x.reshape(-1),
                self.z.reshape(-1),
                self.psi_check,
                [self.mu_check],
            ]
        )

    @property
    def y2(self) -> np.ndarray:
        return np.concatenate([self.u.reshape(-1), self.psi, [self.mu]])

    @property
    def y2_prev(self) -> np.ndarray:
        return np.concatenate([self.u_prev.reshape(-1), self.psi_prev, [self.mu_prev]])


@dataclass
class AdmmDiagnostics:
    """Residual history of an ADMM run."""

    eps_primal: float = DEFAULT_EPS_PRIMAL
    eps_dual: float = DEFAULT_EPS_DUAL
    primal_residuals: list[float] = field(default_factory=list)
    dual_residuals: list[float] = field(default_factory=list)
    rho_history: list[float] = field(default_factory=list)
    converged: bool = False

    @property
    def iterations(self) -> int:
        return len(self.primal_residuals)

    def record(self, primal: float, dual: float, rho: float) -> None:
        self.primal_residuals.append(primal)
        self.dual_residuals.append(dual)
        self.rho_history.append(rho)


@dataclass(frozen=True)
class AdmmResult:
    """Outcome of run_admm."""

    u: np.ndarray
    psi: np.ndarray
    mu: float
    objective: float
    diagnostics: AdmmDiagnostics
    split: AdmmSplit

    @property
    def first_input(self) -> np.ndarray:
        return self.u[0, 0]


def _coupling_matrices(
    ocp: ScenarioOcp, n_y1: int, n_y2: int
) -> tuple[sparse.csr_matrix, sparse.csr_matrix]:
    n_x, n_u, _, n_z = ocp.sys.dims
    S, N = ocp.scenario_count, ocp.horizon
    n_u_total = S * N * n_u
    n_rows = 2 + n_u_total + S
    off_x = n_u_total
    off_psi_check = off_x + S * (N + 1) * n_x + S * N * n_z
    off_mu_check = off_psi_check + S

    M1 = sparse.lil_matrix((n_rows, n_y1))
    M1[0, off_mu_check] = 1.0
    M1[1, off_mu_check] = 1.0
    M1[2 : 2 + n_u_total, :n_u_total] = sparse.eye(n_u_total)
    M1[2 + n_u_total :, off_psi_check:off_mu_check] = sparse.eye(S)

    M2 = sparse.lil_matrix((n_rows, n_y2))
    M2[0, n_u_total : n_u_total + S] = -np.ones(S) / S
    M2[1, n_u_total + S] = -1.0
    M2[2 : 2 + n_u_total, :n_u_total] = -sparse.eye(n_u_total)
    M2[2 + n_u_total :, n_u_total : n_u_total + S] = -sparse.eye(S)
    return M1.tocsr(), M2.tocsr()


def build_admm_split(ocp: ScenarioOcp, rho: float = DEFAULT_RHO) -> AdmmSplit:
    """Assemble the ADMM form of the scenario OCP.

    f1(y1) = gᵀy1 + tracking cost of z and f2(y2) = y2ᵀH y2, so that on any
    feasible point f1 + f2 equals λμ + λ̃ψᵀψ + Sλ̃μ² − 2λ̃μ𝟙ᵀψ plus the
    optional tracking and input penalties.

    Raises:
        InvalidParameter: If rho is not positive
        InfeasibleProblem: If the input box is empty
    """
    if rho <= 0.0:
        raise InvalidParameter(f"rho={rho} must be positive")
    _check_box(ocp)
    n_x, n_u, _, n_z = ocp.sys.dims
    S, N = ocp.scenario_count, ocp.horizon
    stacked = stack_dynamics(ocp)
    n_u_total = S * N * n_u
    n_y1 = n_u_total + S * (N + 1) * n_x + S * N * n_z + S + 1
    n_y2 = n_u_total + S + 1
    M1, M2 = _coupling_matrices(ocp, n_y1, n_y2)

    g = np.zeros(n_y1)
    g[-1] = ocp.lambda_tradeoff
    ones = np.ones((S, 1))
    H = sparse.block_diag(
        [
            ocp.input_weight / S * sparse.eye(n_u_total),
            sparse.csr_matrix(
                ocp.lambda_tilde * np.block([[np.eye(S), -ones], [-ones.T, np.array([[S]])]])
            ),
        ],
        format="csr",
    )

    u0 = np.clip(np.zeros((S, N, n_u)), ocp.u_lower, ocp.u_upper)
    flat = u0.reshape(S, -1)
    x = flat @ stacked.B_tilde.T + stacked.A_tilde @ ocp.x0 + stacked.w_tilde
    z = flat @ stacked.G.T + stacked.h
    psi = z.sum(axis=1)
    mu = float(psi.mean())

    return AdmmSplit(
        ocp=ocp,
        stacked=stacked,
        L_tilde=consensus_matrix(ocp),
        M1=M1,
        M2=M2,
        g=g,
        H=H,
        rho=float(rho),
        u_check=u0.copy(),
        x=x,
        z=z,
        psi_check=psi.copy(),
        mu_check=mu,
        u=u0,
        psi=psi,
        mu=mu,
        u_prev=u0.copy(),
        psi_prev=psi.copy(),
        mu_prev=mu,
        eta=np.zeros(M1.shape[0]),
        factors=_factorize(ocp, stacked.G, stacked.phi_gradient, float(rho)),
    )


def load_point(split: AdmmSplit, u: npt.ArrayLike, psi: npt.ArrayLike | None = None) -> AdmmSplit:
    """Place both blocks at the feasible point defined by (u, ψ)."""
    ocp, stacked = split.ocp, split.stacked
    S = ocp.scenario_count
    inputs = _scenario_inputs(ocp, u).copy()
    flat = inputs.reshape(S, -1)
    z = flat @ stacked.G.T + stacked.h
    values = z.sum(axis=1) if psi is None else np.asarray(psi, dtype=float).reshape(-1)
    mu = float(values.mean())
    x = flat @ stacked.B_tilde.T + stacked.A_tilde @ ocp.x0 + stacked.w_tilde
    return replace(
        split,
        u_check=inputs.copy(),
        x=x,
        z=z,
        psi_check=values.copy(),
        mu_check=mu,
        u=inputs,
        psi=values.copy(),
        mu=mu,
        u_prev=inputs.copy(),
        psi_prev=values.copy(),
        mu_prev=mu,
    )


def split_objective(split: AdmmSplit) -> float:
    """f1(y1) + f2(y2) at the current iterate."""
    ocp = split.ocp
    zref = np.asarray(ocp.z_reference).reshape(-1)
    f1 = float(split.g @ split.y1) + ocp.tracking_weight / ocp.scenario_count * float(
        np.sum((split.z - zref) ** 2)
    )
    y2 = split.y2
    f2 = float(y2 @ (split.H @ y2))
    return f1 + f2


def coupling_residual(split: AdmmSplit) -> np.ndarray:
    """M1·y1 + M2·y2."""
    return np.asarray(split.M1 @ split.y1 + split.M2 @ split.y2)


def residuals(split: AdmmSplit) -> tuple[float, float]:
    """Primal ‖M1y1 + M2y2‖ and dual ρ‖M1ᵀM2(y2 − y2_prev)‖ residual norms."""
    primal = float(np.linalg.norm(coupling_residual(split)))
    delta = split.y2 - split.y2_prev
    dual = split.rho * float(np.linalg.norm(split.M1.T @ (split.M2 @ delta)))
    return primal, dual


def admm_iterate(split: AdmmSplit) -> AdmmSplit:
    """Run one pass of the y1, y2 and dual updates.

    Raises:
        SubproblemFailure: If a subproblem produces a non-finite iterate
    """
    ocp, stacked, factors = split.ocp, split.stacked, split.factors
    rho = split.rho
    S, N = ocp.scenario_count, ocp.horizon
    n_u = ocp.sys.dims[1]
    n_u_total = S * N * n_u
    eta1, eta2 = split.eta[0], split.eta[1]
    eta3 = split.eta[2 : 2 + n_u_total].reshape(S, -1)
    eta4 = split.eta[2 + n_u_total :]
    G, g, c = stacked.G, stacked.phi_gradient, stacked.phi_offset
    zref = np.asarray(ocp.z_reference).reshape(-1)
    kappa = 2.0 * ocp.tracking_weight / S

    # y1 block
    mu_check = (
        (split.psi.sum() / S - eta1) + (split.mu - eta2)
    ) / 2.0 - ocp.lambda_tradeoff / (2.0 * rho)

    a = split.u.reshape(S, -1) - eta3
    b = split.psi - eta4
    tracking_rhs = kappa * (stacked.h - zref) @ G
    rhs_inactive = rho * a - tracking_rhs
    u_check = scipy.linalg.cho_solve(factors.inactive, rhs_inactive.T).T
    psi_check = b.copy()
    violated = b < u_check @ g + c
    if np.any(violated):
        rhs_active = rho * a - rho * np.outer(c - b, g) - tracking_rhs
        active_solution = scipy.linalg.cho_solve(factors.active, rhs_active.T).T
        u_check[violated] = active_solution[violated]
        psi_check[violated] = active_solution[violated] @ g + c[violated]

    x = u_check @ stacked.B_tilde.T + stacked.A_tilde @ ocp.x0 + stacked.w_tilde
    z = u_check @ G.T + stacked.h

    # y2 block
    a2 = (u_check + eta3).reshape(S, N, n_u)
    shared = ocp.shared_steps
    u = np.empty_like(a2)
    u[:, :shared] = rho * a2[:, :shared].sum(axis=0) / (rho * S + 2.0 * ocp.input_weight)
    u[:, shared:] = rho * a2[:, shared:] / (rho + 2.0 * ocp.input_weight / S)
    u = np.clip(u, ocp.u_lower, ocp.u_upper)

    rhs_psi = rho / S * (mu_check + eta1) + rho * (psi_check + eta4)
    rhs = np.concatenate([rhs_psi, [rho * (mu_check + eta2)]])
    psi_mu = scipy.linalg.cho_solve(factors.psi_mu, rhs)
    psi, mu = psi_mu[:S], float(psi_mu[S])

    if not (
        np.all(np.isfinite(u_check))
        and np.all(np.isfinite(psi_mu))
        and np.isfinite(mu_check)
    ):
        raise SubproblemFailure("ADMM subproblem produced a non-finite iterate")

    updated = replace(
        split,
        u_check=u_check.reshape(S, N, n_u),
        x=x,
        z=z,
        psi_check=psi_check,
        mu_check=float(mu_check),
        u=u,
        psi=psi,
        mu=mu,
        u_prev=split.u,
        psi_prev=split.psi,
        mu_prev=split.mu,
    )
    return replace(updated, eta=split.eta + coupling_residual(updated))


def check_stopping(diag: AdmmDiagnostics, split: AdmmSplit) -> bool:
    """Whether both residuals are within tolerance (inclusive).

    The latest recorded residuals are used; a fresh diagnostics object falls
    back to the residuals of the split itself.
    """
    if diag.primal_residuals:
        primal, dual = diag.primal_residuals[-1], diag.dual_residuals[-1]
    else:
        primal, dual = residuals(split)
    return primal <= diag.eps_primal and dual <= diag.eps_dual


def rescale_rho(split: AdmmSplit, rho: float) -> AdmmSplit:
    """Change the penalty, rescaling the scaled dual and refactoring."""
    if rho <= 0.0:
        raise InvalidParameter(f"rho={rho} must be positive")
    return replace(
        split,
        rho=rho,
        eta=split.eta * (split.rho / rho),
        factors=_factorize(split.ocp, split.stacked.G, split.stacked.phi_gradient, rho),
    )


def run_admm(
    ocp: ScenarioOcp,
    rho: float = DEFAULT_RHO,
    eps_primal: float = DEFAULT_EPS_PRIMAL,
    eps_dual: float = DEFAULT_EPS_DUAL,
    max_iters: int = DEFAULT_ADMM_MAX_ITERS,
    residual_balancing: bool = DEFAULT_RESIDUAL_BALANCING,
) -> AdmmResult:
    """Iterate ADMM until both residuals meet their tolerances.

    Args:
        ocp: Scenario problem
        rho: Initial penalty parameter
        eps_primal: Primal residual tolerance ε_P
        eps_dual: Dual residual tolerance ε_D
        max_iters: Iteration cap
        residual_balancing: Rescale ρ when one residual dominates the other

    Returns:
        The consensus inputs with the residual history

    Raises:
        IterationLimit: If the cap is hit; the partial AdmmResult is attached
    """
    split = build_admm_split(ocp, rho)
    diag = AdmmDiagnostics(eps_primal=eps_primal, eps_dual=eps_dual)

    for iteration in range(1, max_iters + 1):
        split = admm_iterate(split)
        primal, dual = residuals(split)
        diag.record(primal, dual, split.rho)
        if iteration % 100 == 0:
            _LOGGER.debug(
                "ADMM iteration %s: primal %.3e, dual %.3e, rho %s",
                iteration,
                primal,
                dual,
                split.rho,
            )
        if check_stopping(diag, split):
            diag.converged = True
            break
        if residual_balancing:
            if primal > RESIDUAL_BALANCE_RATIO * dual:
                split = rescale_rho(split, split.rho * RESIDUAL_BALANCE_FACTOR)
            elif dual > RESIDUAL_BALANCE_RATIO * primal:
                split = rescale_rho(split, split.rho / RESIDUAL_BALANCE_FACTOR)

    result = AdmmResult(
        u=split.u,
        psi=split.psi,
        mu=split.mu,
        objective=ocp_objective(ocp, split.u, split.psi),
        diagnostics=diag,
        split=split,
    )
    if not diag.converged:
        raise IterationLimit(
            f"ADMM did not converge within {max_iters} iterations", result=result
        )
    _LOGGER.debug("ADMM converged after %s iterations", diag.iterations)
    return result


@dataclass(frozen=True)
class RecedingHorizonResult:
    """Closed-loop trajectory under receding-horizon control."""

    states: np.ndarray
    inputs: np.ndarray
    objectives: np.ndarray


def solve_ocp(ocp: ScenarioOcp, solver: str = SOLVER_CENTRALIZED, **admm_options: Any) -> OcpSolution:
    """Solve with the named solver and return a common solution type."""
    if solver == SOLVER_CENTRALIZED:
        return solve_ocp_centralized(ocp)
    if solver == SOLVER_ADMM:
        result = run_admm(ocp, **admm_options)
        return OcpSolution(u=result.u, psi=result.psi, objective=result.objective)
    raise InvalidParameter(f"Unknown solver {solver!r}")


def run_receding_horizon(
    ocp: ScenarioOcp,
    realised_noise: npt.ArrayLike,
    resample: Callable[[int, np.ndarray], np.ndarray] | None = None,
    solver: str = SOLVER_CENTRALIZED,
    **admm_options: Any,
) -> RecedingHorizonResult:
    """Apply the first optimal input, observe the state and re-solve.

    Args:
        ocp: Problem solved at the first step; x0 is the initial state
        realised_noise: Noise hitting the plant, shape (steps, n_x)
        resample: Optional callback (step, state) -> noise draws (S, N, n_x)
        solver: SOLVER_CENTRALIZED or SOLVER_ADMM
        **admm_options: Forwarded to run_admm

    Returns:
        States of shape (steps + 1, n_x) and applied inputs (steps, n_u)
    """
    sys = ocp.sys
    n_x, n_u, _, _ = sys.dims
    noise = np.asarray(realised_noise, dtype=float).reshape(-1, n_x)
    steps = noise.shape[0]
    states = np.empty((steps + 1, n_x))
    inputs = np.empty((steps, n_u))
    objectives = np.empty(steps)
    states[0] = ocp.x0
    problem = ocp
    for k in range(steps):
        if k > 0:
            draws = problem.noise_draws if resample is None else resample(k, states[k])
            problem = replace(problem, x0=states[k], noise_draws=draws)
        solution = solve_ocp(problem, solver, **admm_options)
        inputs[k] = solution.u[0, 0]
        objectives[k] = solution.objective
        states[k + 1] = sys.A @ states[k] + sys.B @ inputs[k] + noise[k]
    return RecedingHorizonResult(states=states, inputs=inputs, objectives=objectives)
