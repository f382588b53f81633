"""Dual consensus ADMM for the issuance auction over an unreliable network.

The manager and the users exchange their copies of the price λ over a star
topology: every user is linked to the manager only. Each round the network
draws the online users Ω^k and the surviving links Ψ^k; offline users keep
every local variable unchanged and a dead link keeps its edge average.

A link's dual contribution (μ on the manager, μ_i on the user) is advanced
only when the link delivered fresh values in the previous round, so the two
sides always move by equal and opposite amounts. On a fully reliable
network this coincides with the plain synchronous recursions.
"""

from __future__ import annotations

import logging
from collections.abc import Callable, Sequence
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
import numpy.typing as npt
import pandas as pd

from .auction import (
    AuctionInstance,
    AuctionOutcome,
    DemandReport,
    IssuanceBounds,
    ValuationModel,
    apply_overstatement_penalty,
    standalone_optimum,
    tie_break_curvature,
    user_utility,
    vcg_payment,
)
from .const import (
    CSV_FLOAT_FORMAT,
    DEFAULT_CONSENSUS_EPS,
    DEFAULT_CONSENSUS_MAX_ITERS,
    DEFAULT_CONSENSUS_Q,
    DEFAULT_CONSENSUS_SIGMA,
    MANAGER_NODE,
)
from .exceptions import DimensionMismatch, InvalidParameter, IterationLimit

_LOGGER = logging.getLogger(__name__)

Edge = tuple[int, int]
Tamper = Callable[[int, int, np.ndarray], np.ndarray]


@dataclass(frozen=True)
class NetworkModel:
    """Online probabilities of the users and the link failure probability.

    The manager (node MANAGER_NODE) is always online.
    """

    alpha: tuple[float, ...]
    p_e: float
    edges: tuple[Edge, ...]
    seed: int = 0

    def __post_init__(self) -> None:
        if any(not 0.0 < a <= 1.0 for a in self.alpha):
            raise InvalidParameter("Every alpha_i must lie in (0, 1]")
        if not 0.0 <= self.p_e <= 1.0:
            raise InvalidParameter("p_e must lie in [0, 1]")
        users = len(self.alpha)
        for i, j in self.edges:
            for node in (i, j):
                if node != MANAGER_NODE and not 0 <= node < users:
                    raise InvalidParameter(f"Edge ({i}, {j}) references unknown node {node}")

    @classmethod
    def star(cls, alpha: Sequence[float], p_e: float, seed: int = 0) -> NetworkModel:
        """Every user linked to the manager."""
        return cls(
            alpha=tuple(float(a) for a in alpha),
            p_e=float(p_e),
            edges=tuple((i, MANAGER_NODE) for i in range(len(alpha))),
            seed=seed,
        )

    @classmethod
    def reliable(cls, users: int, seed: int = 0) -> NetworkModel:
        return cls.star([1.0] * users, 0.0, seed)

    @property
    def users(self) -> int:
        return len(self.alpha)

    def online_probability(self, node: int) -> float:
        return 1.0 if node == MANAGER_NODE else self.alpha[node]

    def pair_activity(self, i: int, j: int) -> float:
        """β_ij = α_i α_j (1 − p_e)."""
        return self.online_probability(i) * self.online_probability(j) * (1.0 - self.p_e)


def sample_active_sets(net: NetworkModel, k: int) -> tuple[frozenset[int], frozenset[Edge]]:
    """Draw the online users and the surviving links of round k.

    The draw depends only on (seed, k), so replaying a round reproduces it.
    """
    rng = np.random.default_rng([net.seed, k])
    online = rng.random(net.users) < np.asarray(net.alpha)
    survives = rng.random(len(net.edges)) >= net.p_e
    active_users = frozenset(int(i) for i in np.flatnonzero(online))

    def is_online(node: int) -> bool:
        return node == MANAGER_NODE or node in active_users

    active_edges = frozenset(
        edge
        for edge, alive in zip(net.edges, survives, strict=True)
        if alive and is_online(edge[0]) and is_online(edge[1])
    )
    return active_users, active_edges


@dataclass(frozen=True)
class ManagerState:
    """Auction manager iterate: aggregate dual μ, issuance y and price λ.

    t holds one edge average per user and fresh marks the links that
    delivered new values in the last round.
    """

    mu: np.ndarray
    y: np.ndarray
    lam: np.ndarray
    t: np.ndarray
    fresh: np.ndarray
    q: float
    kappa2: np.ndarray
    y_min: np.ndarray
    y_max: np.ndarray

    @classmethod
    def initial(
        cls, users: int, valuations: ValuationModel, bounds: IssuanceBounds, q: float
    ) -> ManagerState:
        if q <= 0.0:
            raise InvalidParameter("q must be positive")
        T = valuations.slots
        return cls(
            mu=np.zeros(T),
            y=np.zeros(T),
            lam=np.zeros(T),
            t=np.zeros((users, T)),
            fresh=np.ones(users, dtype=bool),
            q=q,
            kappa2=valuations.kappa2,
            y_min=bounds.y_min,
            y_max=bounds.y_max,
        )


@dataclass(frozen=True)
class UserNodeState:
    """Local iterate of one user node."""

    mu: np.ndarray
    z: np.ndarray
    x: np.ndarray
    r: np.ndarray
    t: np.ndarray
    lam: np.ndarray
    fresh: bool
    sigma: float
    C: np.ndarray
    d: np.ndarray
    q: float
    a: np.ndarray
    b: np.ndarray
    c: np.ndarray
    x_min: np.ndarray
    x_max: np.ndarray
    tie_break: np.ndarray

    @classmethod
    def initial(
        cls,
        report: DemandReport,
        a: np.ndarray,
        b: np.ndarray,
        c: np.ndarray,
        capacity: np.ndarray,
        q: float,
        sigma: float,
        tie_break: npt.ArrayLike = 0.0,
    ) -> UserNodeState:
        """Start from zero duals with the polyhedron x ≤ capacity (C = 1)."""
        if sigma <= 0.0 or q <= 0.0:
            raise InvalidParameter("sigma and q must be positive")
        T = report.slots
        return cls(
            mu=np.zeros(T),
            z=np.zeros(T),
            x=np.zeros(T),
            r=np.zeros(T),
            t=np.zeros(T),
            lam=np.zeros(T),
            fresh=True,
            sigma=sigma,
            C=np.ones(T),
            d=np.asarray(capacity, dtype=float).copy(),
            q=q,
            a=np.asarray(a, dtype=float),
            b=np.asarray(b, dtype=float),
            c=np.asarray(c, dtype=float),
            x_min=report.x_min,
            x_max=report.x_max,
            tie_break=np.broadcast_to(np.asarray(tie_break, dtype=float), (T,)).copy(),
        )


def manager_step(m: ManagerState) -> ManagerState:
    """Advance μ, y and λ of the manager from the previous round's edges."""
    q = m.q
    N = m.t.shape[0]
    contribution = 2.0 * q * (m.lam - m.t)
    mu = m.mu + contribution[m.fresh].sum(axis=0)
    s = 2.0 * m.t.sum(axis=0)
    y = np.clip((q * s - mu) / (4.0 * N * q * m.kappa2 + 1.0), m.y_min, m.y_max)
    lam = (-y / q - mu / q + s) / (2.0 * N)
    return replace(m, mu=mu, y=y, lam=lam)


def manager_receive(
    m: ManagerState, user_lambdas: dict[int, np.ndarray]
) -> ManagerState:
    """Refresh the edge averages of the links that delivered a message."""
    t = m.t.copy()
    fresh = np.zeros_like(m.fresh)
    for i, lam_i in user_lambdas.items():
        t[i] = (m.lam + lam_i) / 2.0
        fresh[i] = True
    return replace(m, t=t, fresh=fresh)


def _allocation_update(u: UserNodeState, mu: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Minimise the (x, r) proximal problem slot by slot.

    With r eliminated the objective in x is a convex piecewise quadratic;
    the branch where the polyhedral constraint is slack is tried first.
    """
    q, sigma = u.q, u.sigma
    linear = u.b + (mu - 2.0 * q * u.t) / (2.0 * q)
    curvature = 2.0 * (u.c + u.tie_break) + 1.0 / (2.0 * q)
    offset = sigma * u.z - u.d
    slack_branch = linear / curvature
    tight_branch = (linear - u.C * offset / sigma) / (curvature + u.C**2 / sigma)
    x = np.where(u.C * slack_branch + offset <= 0.0, slack_branch, tight_branch)
    x = np.clip(x, u.x_min, u.x_max)
    r = np.maximum(0.0, -(u.C * x + offset))
    return x, r


def user_step(
    u: UserNodeState,
    manager_lambda: np.ndarray,
    *,
    active: bool,
    edge_active: bool,
) -> UserNodeState:
    """Run the local updates of an online user; offline users are unchanged.

    Args:
        u: Current local state
        manager_lambda: The manager's λ of this round
        active: Whether the user is online this round
        edge_active: Whether the link to the manager survives this round

    Returns:
        The updated local state
    """
    if not active:
        return replace(u, fresh=False)
    mu = u.mu + 2.0 * u.q * (u.lam - u.t) if u.fresh else u.mu
    x, r = _allocation_update(u, mu)
    z = u.z + (u.C * x + r - u.d) / u.sigma
    lam = x / (2.0 * u.q) - mu / (2.0 * u.q) + u.t
    t = (lam + manager_lambda) / 2.0 if edge_active else u.t
    return replace(u, mu=mu, x=x, r=r, z=z, lam=lam, t=t, fresh=edge_active)


def consensus_residuals(
    lam: np.ndarray, user_lambdas: Sequence[np.ndarray], lam_bar_prev: np.ndarray | None
) -> tuple[float, float, np.ndarray]:
    """Disagreement e1, drift e2 of λ̄ and the new average λ̄."""
    stacked = np.vstack([lam, *user_lambdas])
    lam_bar = stacked.mean(axis=0)
    e1 = float(np.sum((stacked - lam_bar) ** 2))
    e2 = np.inf if lam_bar_prev is None else float(np.sum((lam_bar - lam_bar_prev) ** 2))
    return e1, e2, lam_bar


@dataclass
class ConsensusDiagnostics:
    """Per-round residuals and network activity of a consensus run."""

    eps1: float
    eps2: float
    e1: list[float] = field(default_factory=list)
    e2: list[float] = field(default_factory=list)
    active_users: list[int] = field(default_factory=list)
    active_edges: list[int] = field(default_factory=list)
    converged: bool = False

    @property
    def iterations(self) -> int:
        return len(self.e1)

    def record(
        self, step: RoundStep, lam_bar_prev: np.ndarray | None
    ) -> tuple[float, float, np.ndarray]:
        """Append the residuals and activity of one round."""
        e1, e2, lam_bar = consensus_residuals(
            step.manager.lam, [u.lam for u in step.users], lam_bar_prev
        )
        self.e1.append(e1)
        self.e2.append(e2)
        self.active_users.append(len(step.active_users))
        self.active_edges.append(len(step.active_edges))
        return e1, e2, lam_bar

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            {
                "iteration": np.arange(1, self.iterations + 1),
                "e1": self.e1,
                "e2": self.e2,
                "active_users": self.active_users,
                "active_edges": self.active_edges,
            }
        )

    def write_trace(self, path: str | Path) -> None:
        """Write the per-round trace as CSV."""
        self.to_frame().to_csv(
            path, index=False, float_format=CSV_FLOAT_FORMAT, lineterminator="\n"
        )


@dataclass(frozen=True)
class ConsensusResult:
    """Allocation and price reached by the dual consensus iteration."""

    allocation: np.ndarray
    issuance: np.ndarray
    lam: np.ndarray
    diagnostics: ConsensusDiagnostics
    manager: ManagerState
    users: tuple[UserNodeState, ...]


def initial_states(
    reports: Sequence[DemandReport],
    valuations: ValuationModel,
    bounds: IssuanceBounds,
    q: float,
    sigma: float,
) -> tuple[ManagerState, list[UserNodeState]]:
    """Zero-initialised manager and user states for a run."""
    manager = ManagerState.initial(len(reports), valuations, bounds, q)
    ties = tie_break_curvature(valuations, [r.user_id for r in reports])
    users = [
        UserNodeState.initial(
            report,
            valuations.a[i],
            valuations.b[i],
            valuations.c[i],
            bounds.y_max,
            q,
            sigma,
            ties[i],
        )
        for i, report in enumerate(reports)
    ]
    return manager, users


@dataclass(frozen=True)
class RoundStep:
    """States after one round and the λ_i messages the manager received."""

    manager: ManagerState
    users: list[UserNodeState]
    messages: dict[int, np.ndarray]
    active_users: frozenset[int]
    active_edges: frozenset[Edge]


def consensus_round(
    manager: ManagerState,
    users: Sequence[UserNodeState],
    net: NetworkModel,
    k: int,
    tamper: Tamper | None = None,
) -> RoundStep:
    """Run round k: manager update, user updates, then message delivery."""
    active_users, active_edges = sample_active_sets(net, k)
    manager = manager_step(manager)
    updated: list[UserNodeState] = []
    messages: dict[int, np.ndarray] = {}
    for i, user in enumerate(users):
        edge_active = (i, MANAGER_NODE) in active_edges
        user = user_step(user, manager.lam, active=i in active_users, edge_active=edge_active)
        updated.append(user)
        if edge_active:
            messages[i] = user.lam if tamper is None else tamper(k, i, user.lam)
    return RoundStep(
        manager=manager_receive(manager, messages),
        users=updated,
        messages=messages,
        active_users=active_users,
        active_edges=active_edges,
    )


def run_dual_consensus(
    reports: Sequence[DemandReport],
    valuations: ValuationModel,
    bounds: IssuanceBounds,
    net: NetworkModel,
    q: float = DEFAULT_CONSENSUS_Q,
    sigma: float = DEFAULT_CONSENSUS_SIGMA,
    eps1: float = DEFAULT_CONSENSUS_EPS,
    eps2: float = DEFAULT_CONSENSUS_EPS,
    max_iters: int = DEFAULT_CONSENSUS_MAX_ITERS,
    tamper: Tamper | None = None,
) -> ConsensusResult:
    """Iterate the manager and user recursions until consensus on λ.

    Args:
        reports: Reported demands, one per user node
        valuations: Valuations used by the users
        bounds: Issuance bounds of the manager
        net: Network reliability model
        q: Manager penalty
        sigma: User penalty σ_i
        eps1: Disagreement tolerance ε₁
        eps2: λ̄ drift tolerance ε₂
        max_iters: Round cap
        tamper: Optional (round, user, λ_i) -> sent λ_i hook for deviation tests

    Returns:
        The consensus allocation with the per-round diagnostics

    Raises:
        IterationLimit: If the cap is hit; the partial ConsensusResult is attached
    """
    if len(reports) != net.users:
        raise DimensionMismatch(
            f"Network has {net.users} users but {len(reports)} reports were given"
        )
    manager, users = initial_states(reports, valuations, bounds, q, sigma)
    diag = ConsensusDiagnostics(eps1=eps1, eps2=eps2)
    lam_bar: np.ndarray | None = None

    for k in range(1, max_iters + 1):
        step = consensus_round(manager, users, net, k, tamper)
        manager, users = step.manager, step.users
        e1, e2, lam_bar = diag.record(step, lam_bar)
        if k % 1000 == 0:
            _LOGGER.debug("Consensus round %s: e1 %.3e, e2 %.3e", k, e1, e2)
        if k >= 2 and e1 <= eps1 and e2 <= eps2:
            diag.converged = True
            break

    result = ConsensusResult(
        allocation=np.vstack([u.x for u in users]),
        issuance=manager.y,
        lam=manager.lam,
        diagnostics=diag,
        manager=manager,
        users=tuple(users),
    )
    if not diag.converged:
        raise IterationLimit(
            f"Dual consensus did not converge within {max_iters} rounds", result=result
        )
    _LOGGER.debug("Dual consensus converged after %s rounds", diag.iterations)
    return result


def standalone_allocations(
    reports: Sequence[DemandReport], valuations: ValuationModel
) -> np.ndarray:
    """x'_i = argmax over X_i of v_i, solved locally by every user."""
    return np.vstack(
        [
            standalone_optimum(r, valuations.a[i], valuations.b[i], valuations.c[i])
            for i, r in enumerate(reports)
        ]
    )


def protocol_outcome(
    valuations: ValuationModel,
    standalone: np.ndarray,
    allocation: np.ndarray,
    user_ids: Sequence[str],
    iterations: int | None,
) -> AuctionOutcome:
    """Manager-side payment step from the consensus allocation.

    Issuance is the total allocated amount; the exclusion allocation of user
    i is every other user's standalone optimum.
    """
    N, T = allocation.shape
    issuance = allocation.sum(axis=0)
    exclusions = np.zeros((N, N, T))
    for i in range(N):
        exclusions[i] = standalone
        exclusions[i, i] = 0.0
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
        exclusions=exclusions,
        user_ids=tuple(user_ids),
        cost=cost,
        iterations=iterations,
    )


def run_protocol_one(
    reports: Sequence[DemandReport],
    valuations: ValuationModel,
    bounds: IssuanceBounds,
    net: NetworkModel,
    **consensus_options: float | int | Tamper | None,
) -> AuctionOutcome:
    """Run the decentralised auction end to end.

    Reports are collected, each user solves its standalone problem, the
    dual consensus iteration computes the allocation and the manager
    charges VCG payments.

    Raises:
        IterationLimit: If consensus is not reached; carries the partial outcome
    """
    standalone = standalone_allocations(reports, valuations)
    user_ids = [r.user_id for r in reports]
    try:
        result = run_dual_consensus(reports, valuations, bounds, net, **consensus_options)  # type: ignore[arg-type]
    except IterationLimit as err:
        partial: ConsensusResult = err.result
        outcome = protocol_outcome(
            valuations,
            standalone,
            partial.allocation,
            user_ids,
            partial.diagnostics.iterations,
        )
        raise IterationLimit(str(err), result=outcome) from err
    return protocol_outcome(
        valuations, standalone, result.allocation, user_ids, result.diagnostics.iterations
    )


def faithfulness_probe(
    instance: AuctionInstance,
    net: NetworkModel,
    i: int,
    biases: Sequence[float],
    **consensus_options: float | int,
) -> np.ndarray:
    """Utility change of user i when it biases every λ_i broadcast.

    Returns one gain per bias relative to the compliant run; runs that hit
    the round cap are scored on their last iterate.
    """
    valuations = instance.valuation.reported(instance.reports)

    def utility(tamper: Tamper | None) -> float:
        try:
            outcome = run_protocol_one(
                instance.reports, valuations, instance.bounds, net, tamper=tamper, **consensus_options
            )
        except IterationLimit as err:
            outcome = err.result
        outcome = apply_overstatement_penalty(outcome, i, instance.reports[i].x_max)
        return user_utility(valuations, outcome.allocation, outcome.payments, i)

    compliant = utility(None)
    gains = []
    for bias in biases:

        def biased(k: int, node: int, lam: np.ndarray, bias: float = bias) -> np.ndarray:
            return lam + bias if node == i else lam

        gains.append(utility(biased) - compliant)
    return np.asarray(gains)


def residual_decay_slope(e1: npt.ArrayLike, start: int = 10) -> float:
    """Log-log slope of the mean disagreement over windows [k, 2k)."""
    residual = np.asarray(e1, dtype=float)
    ks, means = [], []
    k = start
    while 2 * k <= residual.size:
        window = residual[k - 1 : 2 * k - 1]
        mean = float(window.mean())
        if mean > 0.0:
            ks.append(k)
            means.append(mean)
        k *= 2
    if len(ks) < 2:
        raise InvalidParameter("Not enough rounds to estimate a decay slope")
    slope, _ = np.polyfit(np.log(ks), np.log(means), 1)
    return float(slope)
