"""Convex quadratic programming on top of OSQP.

OSQP returns first-order accurate iterates. The solution is then refined by
fixing the constraints OSQP reports as active and solving the resulting
equality-constrained KKT system exactly, which brings the answer to the
accuracy needed by grid-search oracles.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
import numpy.typing as npt
import osqp
import scipy.linalg
import scipy.sparse as sparse

from .const import QP_ACTIVE_TOL, QP_EPS, QP_FEASIBILITY_TOL, QP_MAX_ITER
from .exceptions import InfeasibleProblem, SubproblemFailure

_LOGGER = logging.getLogger(__name__)

MatrixLike = npt.ArrayLike | sparse.spmatrix


@dataclass(frozen=True)
class QpSolution:
    """Solution of a quadratic program."""

    x: np.ndarray
    objective: float
    status: str
    refined: bool


def _objective(P: sparse.csc_matrix, q: np.ndarray, x: np.ndarray) -> float:
    return float(0.5 * x @ (P @ x) + q @ x)


def _is_feasible(
    A: sparse.csc_matrix, lower: np.ndarray, upper: np.ndarray, x: np.ndarray
) -> bool:
    Ax = A @ x
    scale = 1.0 + np.max(np.abs(Ax), initial=0.0)
    tol = QP_FEASIBILITY_TOL * scale
    return bool(np.all(Ax >= lower - tol) and np.all(Ax <= upper + tol))


def _refine(
    P: sparse.csc_matrix,
    q: np.ndarray,
    A: sparse.csc_matrix,
    lower: np.ndarray,
    upper: np.ndarray,
    x: np.ndarray,
    y: np.ndarray,
) -> np.ndarray | None:
    """Solve the KKT system on the active set identified by OSQP."""
    Ax = A @ x
    scale = 1.0 + np.max(np.abs(Ax), initial=0.0)
    tol = QP_ACTIVE_TOL * scale

    equality = np.isclose(lower, upper, rtol=0.0, atol=QP_FEASIBILITY_TOL)
    at_lower = ~equality & (Ax - lower <= tol) & (y <= 0.0)
    at_upper = ~equality & ~at_lower & (upper - Ax <= tol) & (y >= 0.0)
    active = equality | at_lower | at_upper
    rhs_active = np.where(at_upper, upper, lower)[active]

    n = x.size
    A_active = A[np.flatnonzero(active)].toarray()
    m = A_active.shape[0]
    kkt = np.zeros((n + m, n + m))
    kkt[:n, :n] = P.toarray()
    kkt[:n, n:] = A_active.T
    kkt[n:, :n] = A_active
    rhs = np.concatenate([-q, rhs_active])

    solution, _, _, _ = scipy.linalg.lstsq(kkt, rhs)
    if not np.all(np.isfinite(solution)):
        return None
    if np.linalg.norm(kkt @ solution - rhs) > 1e-7 * (1.0 + np.linalg.norm(rhs)):
        return None
    return np.asarray(solution[:n])


def solve_qp(
    P: MatrixLike,
    q: npt.ArrayLike,
    A: MatrixLike,
    lower: npt.ArrayLike,
    upper: npt.ArrayLike,
) -> QpSolution:
    """Minimise ½xᵀPx + qᵀx subject to lower ≤ Ax ≤ upper.

    Args:
        P: Symmetric positive semidefinite cost matrix
        q: Linear cost vector
        A: Constraint matrix
        lower: Lower constraint bounds (may contain -inf)
        upper: Upper constraint bounds (may contain +inf)

    Returns:
        The solution with its objective value

    Raises:
        InfeasibleProblem: If the constraint set is empty
        SubproblemFailure: If the solver returns no usable iterate
    """
    P_csc = sparse.csc_matrix(P, dtype=float)
    A_csc = sparse.csc_matrix(A, dtype=float)
    q_vec = np.asarray(q, dtype=float).ravel()
    lower_vec = np.asarray(lower, dtype=float).ravel()
    upper_vec = np.asarray(upper, dtype=float).ravel()

    if np.any(lower_vec > upper_vec + QP_FEASIBILITY_TOL):
        raise InfeasibleProblem("Constraint bounds are inverted (lower > upper)")

    solver = osqp.OSQP()
    solver.setup(
        P=sparse.triu(P_csc, format="csc"),
        q=q_vec,
        A=A_csc,
        l=lower_vec,
        u=upper_vec,
        eps_abs=QP_EPS,
        eps_rel=QP_EPS,
        max_iter=QP_MAX_ITER,
        verbose=False,
    )
    result = solver.solve()
    status = str(result.info.status).lower()
    _LOGGER.debug("OSQP finished with status %s", status)

    if "primal infeasible" in status:
        raise InfeasibleProblem(f"Quadratic program is infeasible ({status})")
    if result.x is None or not np.all(np.isfinite(result.x)):
        raise SubproblemFailure(f"Quadratic program solver failed ({status})")

    x = np.asarray(result.x, dtype=float)
    y = np.asarray(result.y, dtype=float)
    refined = _refine(P_csc, q_vec, A_csc, lower_vec, upper_vec, x, y)

    used_refinement = False
    if refined is not None and _is_feasible(A_csc, lower_vec, upper_vec, refined):
        base = _objective(P_csc, q_vec, x)
        candidate = _objective(P_csc, q_vec, refined)
        if candidate <= base + 1e-9 * (1.0 + abs(base)):
            x = refined
            used_refinement = True
    if not used_refinement:
        _LOGGER.debug("Active-set refinement rejected, keeping OSQP iterate")

    return QpSolution(
        x=x,
        objective=_objective(P_csc, q_vec, x),
        status=status,
        refined=used_refinement,
    )
