"""Dense convex quadratic programs with equality and nonnegativity constraints.

Solves::

    minimize    0.5 * b' Q b + g' b + const
    subject to  E b = d
                b >= 0          (when ``nonneg``)

with ``Q`` positive semidefinite.  The method is a primal active set on the
null space of the working constraints, preceded by a feasibility phase
(nonnegative least squares on the equality residual).  Redundant equality
rows are removed up front with a pivoted QR, since the agreement blocks
built by :mod:`resilient_hull.resilient` are never full row rank.
"""

from __future__ import annotations

import enum
import logging
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from ._arrays import as_matrix, as_vector

log = logging.getLogger(__name__)

DEFAULT_TOL = 1e-9


class QpStatus(str, enum.Enum):
    OPTIMAL = "Optimal"
    INFEASIBLE = "Infeasible"
    MAX_ITERATIONS = "MaxIterations"


class UnboundedError(ValueError):
    """The objective decreases without bound on the feasible set."""


@dataclass(frozen=True)
class QpProblem:
    Q: np.ndarray
    g: np.ndarray
    E: np.ndarray
    d: np.ndarray
    nonneg: bool = True
    const: float = 0.0

    def __post_init__(self):
        Q = as_matrix(self.Q, "Q")
        g = as_vector(self.g, "g")
        k = g.shape[0]
        if Q.shape != (k, k):
            raise ValueError(f"Q must be {k}x{k}, got {Q.shape}")
        if np.max(np.abs(Q - Q.T), initial=0.0) > 1e-12 * max(1.0, np.max(np.abs(Q))):
            raise ValueError("Q is not symmetric")
        E = as_matrix(self.E, "E", cols=k)
        if E.shape[1] != k:
            raise ValueError(f"E must have {k} columns, got {E.shape[1]}")
        d = np.asarray(self.d, dtype=float).reshape(-1)
        if d.shape[0] != E.shape[0]:
            raise ValueError(f"d has {d.shape[0]} entries but E has {E.shape[0]} rows")
        if not np.all(np.isfinite(d)):
            raise ValueError("d has non-finite entries")
        object.__setattr__(self, "Q", Q)
        object.__setattr__(self, "g", g)
        object.__setattr__(self, "E", E)
        object.__setattr__(self, "d", d)
        object.__setattr__(self, "const", float(self.const))

    @property
    def k(self) -> int:
        return self.g.shape[0]

    def objective(self, beta) -> float:
        beta = np.asarray(beta, dtype=float)
        return float(0.5 * beta @ self.Q @ beta + self.g @ beta + self.const)


@dataclass(frozen=True)
class KktResiduals:
    """Infinity-norm residuals of the KKT conditions at a candidate point."""

    equality: float
    bound: float
    stationarity: float
    complementarity: float

    @property
    def primal(self) -> float:
        return max(self.equality, self.bound)

    @property
    def dual(self) -> float:
        return self.stationarity

    def max(self) -> float:
        return max(self.equality, self.bound, self.stationarity, self.complementarity)


@dataclass(frozen=True)
class QpSolution:
    beta: np.ndarray
    objective: float
    status: QpStatus
    kkt: KktResiduals | None
    eq_multipliers: np.ndarray | None = None
    bound_multipliers: np.ndarray | None = None
    iterations: int = 0
    message: str = ""

    @property
    def optimal(self) -> bool:
        return self.status is QpStatus.OPTIMAL


def kkt_residuals(problem: QpProblem, beta, multipliers=None) -> KktResiduals:
    """Evaluate KKT residuals of ``problem`` at ``beta``.

    Parameters
    ----------
    problem : QpProblem
    beta : array_like
        Candidate point.
    multipliers : tuple of (nu, mu), optional
        Equality and bound multipliers.  Negative ``mu`` entries are clipped
        to zero before use, so a wrong-signed multiplier shows up in the
        stationarity residual.  When omitted, ``nu`` is the least-squares
        fit of the gradient and ``mu`` is fitted only on coordinates where
        ``beta`` is (numerically) zero.

    Returns
    -------
    KktResiduals
        ``||E b - d||``, ``||min(b, 0)||``, ``||Q b + g - E' nu - mu||`` and
        ``||mu * b||``, all in the infinity norm.
    """
    beta = as_vector(beta, "beta")
    if beta.shape[0] != problem.k:
        raise ValueError(f"beta has {beta.shape[0]} entries, expected {problem.k}")
    E, d = problem.E, problem.d
    grad = problem.Q @ beta + problem.g
    if multipliers is None:
        nu, mu = _estimate_multipliers(problem, beta, grad)
    else:
        nu, mu = multipliers
        nu = np.zeros(E.shape[0]) if nu is None else np.asarray(nu, dtype=float)
        mu = np.zeros(problem.k) if mu is None else np.asarray(mu, dtype=float)
    if not problem.nonneg:
        mu = np.zeros(problem.k)
    mu = np.maximum(mu, 0.0)

    def inf_norm(v):
        return float(np.max(np.abs(v), initial=0.0))

    return KktResiduals(
        equality=inf_norm(E @ beta - d),
        bound=inf_norm(np.minimum(beta, 0.0)) if problem.nonneg else 0.0,
        stationarity=inf_norm(grad - E.T @ nu - mu),
        complementarity=inf_norm(mu * beta),
    )


def _estimate_multipliers(problem, beta, grad, zero_tol=1e-12):
    k = problem.k
    at_bound = np.zeros(k, dtype=bool)
    if problem.nonneg:
        at_bound = np.abs(beta) <= zero_tol * max(1.0, np.max(np.abs(beta)))
    cols = [problem.E.T, np.eye(k)[:, at_bound]]
    A = np.hstack(cols)
    if A.shape[1] == 0:
        return np.zeros(0), np.zeros(k)
    lam = np.linalg.lstsq(A, grad, rcond=None)[0]
    e = problem.E.shape[0]
    mu = np.zeros(k)
    mu[at_bound] = lam[e:]
    return lam[:e], mu


def _check_psd(Q: np.ndarray) -> None:
    scale = max(1.0, float(np.max(np.abs(Q), initial=0.0)))
    shift = 1e-10 * scale
    try:
        np.linalg.cholesky(Q + shift * np.eye(Q.shape[0]))
    except np.linalg.LinAlgError:
        raise ValueError("Q is not positive semidefinite") from None


def _independent_rows(E: np.ndarray, rank_tol: float) -> np.ndarray:
    """Indices of a maximal linearly independent subset of the rows of E."""
    if E.shape[0] == 0:
        return np.zeros(0, dtype=int)
    _, R, piv = scipy.linalg.qr(E.T, mode="economic", pivoting=True)
    diag = np.abs(np.diag(R))
    if diag.size == 0 or diag[0] == 0.0:
        return np.zeros(0, dtype=int)
    rank = int(np.sum(diag > rank_tol * diag[0]))
    return np.sort(piv[:rank])


class _Face:
    """Pivoted QR of the equality rows restricted to the free coordinates,
    giving both a null-space basis and equality multipliers."""

    def __init__(self, E: np.ndarray, free: np.ndarray):
        self.free = free.copy()
        nf = int(free.sum())
        self.rank = 0
        if E.shape[0] == 0 or nf == 0:
            self.Z = np.eye(nf)
            return
        Qf, R, piv = scipy.linalg.qr(E[:, free].T, pivoting=True, check_finite=False)
        diag = np.abs(np.diag(R))
        rank = int(np.sum(diag > 1e-12 * diag[0])) if diag.size and diag[0] > 0 else 0
        self.rank = rank
        self.Y, self.R, self.piv = Qf[:, :rank], R[:rank, :rank], piv[:rank]
        self.Z = Qf[:, rank:]

    def matches(self, free: np.ndarray) -> bool:
        return np.array_equal(self.free, free)

    def eq_multipliers(self, grad_free: np.ndarray, rows: int) -> np.ndarray:
        """Basic least-squares ``nu`` with ``E_F' nu ~ grad_F``."""
        nu = np.zeros(rows)
        if self.rank:
            nu[self.piv] = scipy.linalg.solve_triangular(self.R, self.Y.T @ grad_free)
        return nu


def _working_set(E: np.ndarray, beta: np.ndarray) -> np.ndarray:
    """Choose bound constraints at zero that are independent of the rows of E.

    The working set must keep ``E[:, free]`` at full row rank, otherwise
    the bound multipliers are not unique.  Positive coordinates are free by
    necessity; zero coordinates are released only as needed to complete
    the column span.
    """
    zero = beta == 0.0
    active = zero.copy()
    e = E.shape[0]
    if e == 0 or not zero.any():
        return active
    pos_cols = E[:, ~zero]
    if pos_cols.shape[1]:
        U, s, _ = np.linalg.svd(pos_cols, full_matrices=False)
        rank = int(np.sum(s > 1e-12 * max(1.0, s[0])))
        U = U[:, :rank]
    else:
        U = np.zeros((e, 0))
        rank = 0
    need = e - rank
    if need <= 0:
        return active
    zero_idx = np.flatnonzero(zero)
    rem = E[:, zero_idx] - U @ (U.T @ E[:, zero_idx])
    _, R, piv = scipy.linalg.qr(rem, mode="economic", pivoting=True)
    diag = np.abs(np.diag(R))
    take = piv[: min(need, int(np.sum(diag > 1e-12 * max(1.0, diag[0] if diag.size else 1.0))))]
    active[zero_idx[take]] = False
    return active


def nnls(A: np.ndarray, b: np.ndarray, r_stop: float = 0.0, max_iter: int | None = None) -> np.ndarray:
    """Lawson-Hanson nonnegative least squares, ``min ||A x - b||`` over ``x >= 0``.

    Stops early once the residual is below ``r_stop`` in the infinity norm.
    """
    m, k = A.shape
    if max_iter is None:
        max_iter = 3 * max(k, 1) + 10
    eps = np.finfo(float).eps
    a_max = max(1.0, float(np.max(np.abs(A), initial=0.0)))
    b_max = float(np.max(np.abs(b), initial=0.0))
    x = np.zeros(k)
    passive = np.zeros(k, dtype=bool)
    for _ in range(max_iter):
        r = b - A @ x
        if np.max(np.abs(r), initial=0.0) <= r_stop:
            break
        w = A.T @ r
        # roundoff floor of the gradient, independent of problem conditioning
        w_tol = 10.0 * eps * a_max * (a_max * float(np.max(x, initial=0.0)) + b_max)
        cand = ~passive & (w > w_tol)
        if not cand.any():
            break
        passive[int(np.argmax(np.where(cand, w, -np.inf)))] = True
        while True:
            z = np.zeros(k)
            z[passive] = np.linalg.lstsq(A[:, passive], b, rcond=None)[0]
            bad = passive & (z <= 0.0)
            if not bad.any():
                x = z
                break
            idx = np.flatnonzero(bad)
            ratios = x[idx] / (x[idx] - z[idx])
            j = int(np.argmin(ratios))
            x = x + float(ratios[j]) * (z - x)
            # the blocking variable always leaves, so the inner loop terminates
            x[idx[j]] = 0.0
            passive &= x > 1e-15
            x[~passive] = 0.0
    return x


def _feasible_start(E, d, k, feas_tol):
    """Return a point with b >= 0 and E b = d, or None if none exists."""
    if E.shape[0] == 0:
        return np.zeros(k)
    beta = nnls(E, d, r_stop=0.01 * feas_tol)
    for _ in range(3):
        # polish the equality residual on the support
        free = beta > 0.0
        res = E @ beta - d
        if not free.any():
            break
        corr = np.linalg.lstsq(E[:, free], res, rcond=None)[0]
        trial = beta.copy()
        trial[free] -= corr
        trial[trial < 0.0] = 0.0
        if np.linalg.norm(E @ trial - d) <= np.linalg.norm(res):
            beta = trial
        else:
            break
    if np.max(np.abs(E @ beta - d), initial=0.0) > feas_tol:
        return None
    return beta


def solve_qp(
    problem: QpProblem,
    tol: float = DEFAULT_TOL,
    max_iter: int | None = None,
    x0=None,
) -> QpSolution:
    """Solve a convex QP by a primal active-set method.

    Parameters
    ----------
    problem : QpProblem
    tol : float
        Target for the KKT residuals (scaled by the problem data magnitude).
    max_iter : int, optional
        Active-set iteration cap; defaults to ``50 * k``.
    x0 : array_like, optional
        A known feasible point.  It replaces the feasibility phase when it
        satisfies the constraints to within tolerance and is ignored
        otherwise.

    Returns
    -------
    QpSolution
        ``status`` is ``Infeasible`` when the equalities are inconsistent or
        admit no nonnegative solution.

    Raises
    ------
    ValueError
        If ``Q`` is not PSD or ``tol`` is not positive.
    UnboundedError
        If the objective is unbounded below on the feasible set.
    """
    if not tol > 0:
        raise ValueError("tol must be positive")
    k = problem.k
    if max_iter is None:
        max_iter = 50 * max(k, 1)
    Q, g = problem.Q, problem.g
    _check_psd(Q)

    data_scale = max(
        1.0,
        float(np.max(np.abs(problem.E), initial=0.0)),
        float(np.max(np.abs(problem.d), initial=0.0)),
    )
    feas_tol = tol * data_scale
    keep = _independent_rows(problem.E, 1e-10)
    E, d = problem.E[keep], problem.d[keep]

    if E.shape[0]:
        b0 = np.linalg.lstsq(E, d, rcond=None)[0]
        if np.max(np.abs(problem.E @ b0 - problem.d), initial=0.0) > feas_tol:
            return _infeasible(problem, k, "equality system is inconsistent")

    start = _checked_start(problem, x0, feas_tol)
    if start is not None:
        beta = start
        active = _working_set(E, beta) if problem.nonneg else np.zeros(k, dtype=bool)
    elif problem.nonneg:
        beta = _feasible_start(E, d, k, feas_tol)
        if beta is None:
            return _infeasible(problem, k, "no nonnegative point satisfies the equalities")
        active = _working_set(E, beta)
    else:
        beta = b0 if E.shape[0] else np.zeros(k)
        active = np.zeros(k, dtype=bool)

    grad_scale = max(1.0, float(np.max(np.abs(Q), initial=0.0)), float(np.max(np.abs(g), initial=0.0)))
    dual_tol = tol * grad_scale
    status = QpStatus.MAX_ITERATIONS
    message = ""
    it = 0
    refused: set[int] = set()
    last_drop = None
    face = None
    while it < max_iter:
        it += 1
        free = ~active
        if face is None or not face.matches(free):
            face = _Face(E, free)
        p, ray = _subspace_step(Q, g, beta, free, face, tol)
        step_eps = 1e-13 * max(1.0, float(np.max(np.abs(beta))))
        if np.max(np.abs(p), initial=0.0) > step_eps:
            if last_drop is not None and p[last_drop] <= 0.0:
                # the released bound does not move: its multiplier sign was roundoff
                active[last_drop] = True
                refused.add(last_drop)
                free = ~active
            else:
                alpha, block = _ratio_test(beta, p, free, problem.nonneg, ray)
                if not np.isfinite(alpha):
                    raise UnboundedError("objective is unbounded below on the feasible set")
                beta = beta + alpha * p
                if problem.nonneg:
                    beta[beta < 0.0] = 0.0
                if alpha > 0.0:
                    refused.clear()
                last_drop = None
                if block is not None:
                    beta[block] = 0.0
                    active[block] = True
                    continue
        last_drop = None
        grad = Q @ beta + g
        if not face.matches(free):
            face = _Face(E, free)
        _, mu_w = _working_multipliers(E, grad, free, face)
        idx = np.flatnonzero(active)
        violated = mu_w < -dual_tol
        if not violated.any():
            status = QpStatus.OPTIMAL
            break
        allowed = violated & ~np.isin(idx, list(refused))
        if not allowed.any():
            message = "stalled on a numerically degenerate working set"
            break
        # release the most violated bound; lowest index on ties
        j = int(np.argmin(np.where(allowed, mu_w, np.inf)))
        last_drop = int(idx[j])
        active[last_drop] = False

    nu, mu = _full_multipliers(problem, beta, active)
    kkt = kkt_residuals(problem, beta, (nu, mu))
    if message and kkt.max() <= 10.0 * tol * max(grad_scale, data_scale):
        status, message = QpStatus.OPTIMAL, ""
    if status is QpStatus.MAX_ITERATIONS:
        log.debug("active-set QP stopped early after %d iterations: %s", it, message or "iteration cap")
    return QpSolution(
        beta=beta,
        objective=problem.objective(beta),
        status=status,
        kkt=kkt,
        eq_multipliers=nu,
        bound_multipliers=mu,
        iterations=it,
        message=message,
    )


def _checked_start(problem, x0, feas_tol):
    if x0 is None:
        return None
    x0 = np.array(x0, dtype=float).reshape(-1)
    if x0.shape[0] != problem.k:
        raise ValueError(f"x0 has {x0.shape[0]} entries, expected {problem.k}")
    if problem.nonneg and x0.min(initial=0.0) < 0.0:
        return None
    if np.max(np.abs(problem.E @ x0 - problem.d), initial=0.0) > feas_tol:
        log.debug("supplied start violates the equalities; running the feasibility phase")
        return None
    return x0


def _infeasible(problem, k, msg):
    log.debug("QP infeasible: %s", msg)
    return QpSolution(
        beta=np.full(k, np.nan),
        objective=float("nan"),
        status=QpStatus.INFEASIBLE,
        kkt=None,
        message=msg,
    )


def _subspace_step(Q, g, beta, free, face, tol):
    """Step to the minimizer over the working-set face.

    When the reduced Hessian is singular the minimizers form an affine set;
    the step then lands on its point of least norm.  If the reduced gradient
    has a component along the Hessian kernel, a zero-curvature descent
    direction is returned instead and the caller steps until a bound blocks.
    """
    k = beta.shape[0]
    p = np.zeros(k)
    nf = int(free.sum())
    if nf == 0:
        return p, False
    Z = face.Z
    if Z.shape[1] == 0:
        return p, False
    grad_f = (Q @ beta + g)[free]
    H = Z.T @ Q[np.ix_(free, free)] @ Z
    r = Z.T @ grad_f
    w, V = np.linalg.eigh(H)
    curv = w > 1e-11 * max(1.0, float(np.max(np.abs(w))))
    flat = V[:, ~curv]
    r_flat = flat.T @ r
    if r_flat.size and np.linalg.norm(r_flat) > tol * max(1.0, float(np.max(np.abs(grad_f)))):
        pz = -flat @ r_flat
        p[free] = Z @ pz
        return p, True
    Vc = V[:, curv]
    pz = -Vc @ ((Vc.T @ r) / w[curv])
    if flat.size:
        # Z @ flat has orthonormal columns; drop the component of beta along them
        pz -= flat @ (flat.T @ (Z.T @ beta[free]))
    p[free] = Z @ pz
    return p, False


def _ratio_test(beta, p, free, nonneg, ray):
    alpha = np.inf if ray else 1.0
    block = None
    if not nonneg:
        return alpha, block
    # roundoff-sized components must not block, or degenerate steps cycle
    p_eps = 1e-11 * float(np.max(np.abs(p)))
    cand = np.flatnonzero(free & (p < -p_eps))
    if cand.size:
        steps = -beta[cand] / p[cand]
        j = int(np.argmin(steps))
        if steps[j] < alpha:
            alpha = max(float(steps[j]), 0.0)
            block = int(cand[j])
    return alpha, block


def _working_multipliers(E, grad, free, face):
    nu = face.eq_multipliers(grad[free], E.shape[0])
    mu_w = grad[~free] - (E[:, ~free].T @ nu if E.shape[0] else 0.0)
    return nu, np.atleast_1d(mu_w)


def _full_multipliers(problem, beta, active):
    grad = problem.Q @ beta + problem.g
    free = ~active
    E = problem.E
    if E.shape[0] and free.any():
        nu = np.linalg.lstsq(E[:, free].T, grad[free], rcond=None)[0]
    else:
        nu = np.zeros(E.shape[0])
    mu = np.zeros(problem.k)
    mu[active] = grad[active] - E[:, active].T @ nu
    return nu, mu
