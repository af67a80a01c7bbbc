"""Convex-hull membership and kernel projections."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_triangular

from ._arrays import as_matrix, as_points, as_vector
from .qp import QpProblem, QpStatus, solve_qp

DEFAULT_MEMBERSHIP_TOL = 1e-7
_PIVOT_RATIO = 1e-12


@dataclass(frozen=True)
class MembershipVerdict:
    """Outcome of a hull membership query.

    ``distance`` is the Euclidean distance from the query to the hull and
    ``certificate`` holds the convex weights of the nearest hull point
    (``None`` when the query is not a member).
    """

    is_member: bool
    distance: float
    certificate: np.ndarray | None


def hull_membership(points, query, tol: float = DEFAULT_MEMBERSHIP_TOL) -> MembershipVerdict:
    """Decide whether ``query`` lies in the convex hull of ``points``.

    Solves ``min ||Y a - q||^2`` over the probability simplex, where the
    columns of ``Y`` are the points.
    """
    Y = as_points(points).T
    q = as_vector(query, "query")
    if Y.shape[0] != q.shape[0]:
        raise ValueError(f"points are in R^{Y.shape[0]} but query is in R^{q.shape[0]}")
    if not tol > 0:
        raise ValueError("tol must be positive")
    m = Y.shape[1]
    if m == 1:
        alpha = np.ones(1)
    else:
        prob = QpProblem(
            Q=2.0 * Y.T @ Y,
            g=-2.0 * Y.T @ q,
            E=np.ones((1, m)),
            d=np.ones(1),
            const=float(q @ q),
        )
        sol = solve_qp(prob)
        if sol.status is not QpStatus.OPTIMAL:
            raise RuntimeError(f"membership subproblem ended with status {sol.status.value}")
        alpha = sol.beta
    # direct evaluation; the objective value loses precision near zero
    distance = float(np.linalg.norm(Y @ alpha - q))
    member = distance <= tol
    return MembershipVerdict(member, distance, alpha if member else None)


def kernel_projection(A) -> np.ndarray:
    """Orthogonal projector onto ``ker A`` for a full-row-rank ``A``.

    Returns ``I - A' (A A')^{-1} A``, evaluated as ``I - Q Q'`` where ``Q``
    is an orthonormal basis of the row space built from the Cholesky factor
    of ``A A'``.  Raises ``ValueError`` when ``A A'`` is numerically singular
    (smallest Cholesky pivot below ``1e-12`` times the largest).
    """
    A = as_matrix(A, "A")
    rows, cols = A.shape
    if rows > cols:
        raise ValueError(f"A has more rows than columns ({rows}x{cols}); it cannot have full row rank")
    G = A @ A.T
    try:
        L = np.linalg.cholesky(G)
    except np.linalg.LinAlgError:
        raise ValueError("A is rank deficient") from None
    pivots = np.diag(L) ** 2
    if pivots.min() < _PIVOT_RATIO * pivots.max():
        raise ValueError("A is rank deficient")
    # A' L^-T has orthonormal columns in exact arithmetic; a second Cholesky
    # pass removes the error that the squared conditioning of A A' leaves
    Q = solve_triangular(L, A, lower=True).T
    L2 = np.linalg.cholesky(Q.T @ Q)
    Q = solve_triangular(L2, Q.T, lower=True).T
    P = np.eye(cols) - Q @ Q.T
    return 0.5 * (P + P.T)
