"""Resilient convex combinations through the intersection of convex hulls.

Given ``m`` points of which at most ``kappa`` may be corrupted, and a set of
labels known to be clean, every point in the intersection of the hulls of
all size ``m - kappa`` subsets containing the trusted labels is a convex
combination of clean points only.  One such point, the one whose weights
are closest to uniform, is found by a single QP over the stacked per-subset
weight vectors.

Labels are 0-based indices into the point list.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from ._arrays import as_points
from .linalg import DEFAULT_MEMBERSHIP_TOL, MembershipVerdict, hull_membership
from .qp import DEFAULT_TOL, QpProblem, QpSolution, QpStatus, solve_qp

MAX_SUBSETS = 10_000
AGREEMENT_TOL = 1e-6


class EmptyIntersectionError(RuntimeError):
    """The hulls of the admissible subsets have no common point."""


class SolverError(RuntimeError):
    """The QP did not reach an optimal point."""

    def __init__(self, msg: str, solution: QpSolution | None = None):
        super().__init__(msg)
        self.solution = solution


@dataclass(frozen=True)
class ResilienceProblem:
    points: np.ndarray
    trusted: tuple[int, ...] = ()
    kappa: int = 0

    def __post_init__(self):
        pts = as_points(self.points)
        m = pts.shape[0]
        kappa = int(self.kappa)
        if kappa < 0:
            raise ValueError("kappa must be nonnegative")
        if kappa >= m:
            raise ValueError(f"kappa={kappa} leaves no normal points among m={m}")
        trusted = tuple(sorted(int(t) for t in self.trusted))
        if len(set(trusted)) != len(trusted):
            raise ValueError("trusted labels must be distinct")
        if trusted and (trusted[0] < 0 or trusted[-1] >= m):
            raise ValueError(f"trusted labels must lie in 0..{m - 1}")
        if len(trusted) > m - kappa:
            raise ValueError(f"{len(trusted)} trusted labels exceed p = m - kappa = {m - kappa}")
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "trusted", trusted)
        object.__setattr__(self, "kappa", kappa)

    @property
    def m(self) -> int:
        return self.points.shape[0]

    @property
    def n(self) -> int:
        return self.points.shape[1]

    @property
    def p(self) -> int:
        return self.m - self.kappa

    @property
    def sigma(self) -> int:
        return len(self.trusted)

    @property
    def trivial(self) -> bool:
        return self.sigma >= self.p


@dataclass(frozen=True)
class SubsetFamily:
    subsets: tuple[tuple[int, ...], ...]

    @property
    def r(self) -> int:
        return len(self.subsets)

    def __iter__(self):
        return iter(self.subsets)

    def __len__(self):
        return len(self.subsets)


@dataclass(frozen=True)
class ConstraintSystem:
    X: np.ndarray
    E_align: np.ndarray
    E_simplex: np.ndarray
    center: np.ndarray
    block_sizes: tuple[int, ...]
    n: int

    @property
    def E(self) -> np.ndarray:
        return np.vstack([self.E_align, self.E_simplex])

    @property
    def d(self) -> np.ndarray:
        return np.concatenate([np.zeros(self.E_align.shape[0]), np.ones(self.E_simplex.shape[0])])

    @property
    def r(self) -> int:
        return len(self.block_sizes)

    def split(self, beta) -> list[np.ndarray]:
        cuts = np.cumsum(self.block_sizes)[:-1]
        return np.split(np.asarray(beta, dtype=float), cuts)

    def witnesses(self, beta) -> np.ndarray:
        """Per-block points ``Y_j beta_j`` as rows of an ``r x n`` array."""
        return (self.X @ np.asarray(beta, dtype=float)).reshape(self.r, self.n)


@dataclass(frozen=True)
class CombinationResult:
    u: np.ndarray
    beta: np.ndarray
    witnesses: np.ndarray
    objective: float
    objective_unscaled: float
    family: SubsetFamily
    solution: QpSolution | None = None
    # the program actually solved, in centered and scaled coordinates
    qp: QpProblem | None = field(default=None, repr=False)

    @property
    def status(self) -> QpStatus:
        # the trivial regime needs no solve and is optimal by construction
        return QpStatus.OPTIMAL if self.solution is None else self.solution.status


def subset_count(m: int, sigma: int, kappa: int) -> int:
    return math.comb(m - sigma, kappa)


def enumerate_subsets(problem: ResilienceProblem) -> SubsetFamily:
    """All size-``p`` supersets of the trusted labels, in lexicographic order
    of their untrusted members."""
    m, p, kappa = problem.m, problem.p, problem.kappa
    trusted = set(problem.trusted)
    if kappa >= m:
        raise ValueError("kappa must be smaller than the number of points")
    r = subset_count(m, problem.sigma, kappa)
    if r > MAX_SUBSETS:
        raise ValueError(f"{r} admissible subsets exceed the limit of {MAX_SUBSETS}")
    others = [i for i in range(m) if i not in trusted]
    subsets = tuple(
        tuple(sorted(trusted.union(combo))) for combo in itertools.combinations(others, p - problem.sigma)
    )
    return SubsetFamily(subsets)


def _circulant_difference(r: int) -> np.ndarray:
    if r == 1:
        return np.zeros((0, 1))
    C = np.eye(r)
    C[np.arange(r), (np.arange(r) + 1) % r] = -1.0
    return C


def agreement_system(points, subsets) -> ConstraintSystem:
    """Stack the point matrices of ``subsets`` and build the agreement and
    simplex constraints on the concatenated weight vector.

    Subsets may differ in size; each block's center is uniform weights
    over that block.
    """
    pts = as_points(points)
    n = pts.shape[1]
    blocks = [pts[list(s)].T for s in subsets]
    sizes = tuple(len(s) for s in subsets)
    if not blocks or min(sizes) == 0:
        raise ValueError("every subset must be nonempty")
    r = len(blocks)
    X = np.zeros((n * r, sum(sizes)))
    col = 0
    for j, Y in enumerate(blocks):
        X[j * n:(j + 1) * n, col:col + sizes[j]] = Y
        col += sizes[j]
    C = _circulant_difference(r)
    E_align = np.kron(C, np.eye(n)) @ X if C.shape[0] else np.zeros((0, X.shape[1]))
    E_simplex = np.zeros((r, X.shape[1]))
    col = 0
    for j, s in enumerate(sizes):
        E_simplex[j, col:col + s] = 1.0
        col += s
    center = np.concatenate([np.full(s, 1.0 / s) for s in sizes])
    return ConstraintSystem(X, E_align, E_simplex, center, sizes, n)


def build_constraints(problem: ResilienceProblem, family: SubsetFamily) -> ConstraintSystem:
    return agreement_system(problem.points, family.subsets)


def closest_to_center_qp(system: ConstraintSystem, weight: float = 1.0) -> QpProblem:
    """``min weight * ||beta - center||^2`` subject to agreement and simplex rows."""
    k = system.center.shape[0]
    c = system.center
    return QpProblem(
        Q=2.0 * weight * np.eye(k),
        g=-2.0 * weight * c,
        E=system.E,
        d=system.d,
        nonneg=True,
        const=weight * float(c @ c),
    )


def _trusted_start(problem: ResilienceProblem, family: SubsetFamily) -> np.ndarray | None:
    """All weight on the first trusted point in every block: exactly feasible,
    since every admissible subset contains it."""
    if not problem.trusted:
        return None
    t = problem.trusted[0]
    return np.concatenate([(np.asarray(s) == t).astype(float) for s in family.subsets])


def resilient_combination(
    problem: ResilienceProblem,
    tol: float = DEFAULT_TOL,
    max_iter: int | None = None,
    strict: bool = True,
) -> CombinationResult:
    """Compute the unbiased resilient point ``u`` for ``problem``.

    With ``strict=False`` a solve that stops short of optimality still
    returns its last iterate.  The active-set iterates are always feasible,
    so ``u`` is then still a point of the hull intersection, just not the
    closest-to-uniform one; ``result.status`` records what happened.

    Raises
    ------
    EmptyIntersectionError
        When the admissible hulls do not intersect, which requires an empty
        trusted set and fewer than ``kappa * (n + 1) + 1`` points.
    SolverError
        When the QP stops without reaching optimality.
    """
    pts = problem.points
    if problem.trivial:
        # any convex combination of trusted points will do
        family = SubsetFamily((problem.trusted,))
        w = np.full(problem.sigma, 1.0 / problem.sigma)
        u = w @ pts[list(problem.trusted)]
        return CombinationResult(
            u=u,
            beta=w,
            witnesses=u[None, :],
            objective=0.0,
            objective_unscaled=0.0,
            family=family,
        )

    family = enumerate_subsets(problem)
    # Centering and scaling leave the feasible weights unchanged (each block
    # sums to one) but keep the agreement rows well conditioned when the
    # points nearly coincide.
    shifted = pts - pts.mean(axis=0)
    spread = float(np.max(np.abs(shifted)))
    system = agreement_system(shifted / spread if spread > 0 else shifted, family.subsets)
    qp = closest_to_center_qp(system, weight=1.0 / problem.p)
    sol = solve_qp(qp, tol=tol, max_iter=max_iter, x0=_trusted_start(problem, family))
    if sol.status is QpStatus.INFEASIBLE:
        raise EmptyIntersectionError(
            f"admissible hulls do not intersect (m={problem.m}, n={problem.n}, "
            f"kappa={problem.kappa}, sigma={problem.sigma}): {sol.message}"
        )
    if sol.status is not QpStatus.OPTIMAL and strict:
        raise SolverError(f"QP ended with status {sol.status.value}: {sol.message}", sol)

    blocks = system.split(sol.beta)
    ys = np.array([b @ pts[list(s)] for b, s in zip(blocks, family.subsets)])
    u = ys.mean(axis=0)
    scale = 1.0 + float(np.max(np.linalg.norm(pts, axis=1)))
    disagreement = float(np.max(np.linalg.norm(ys - u, axis=1)))
    if disagreement > AGREEMENT_TOL * scale:
        raise SolverError(f"subset witnesses disagree by {disagreement:.3e}", sol)
    diff = sol.beta - system.center
    unscaled = float(diff @ diff)
    return CombinationResult(
        u=u,
        beta=sol.beta,
        witnesses=ys,
        objective=unscaled / problem.p,
        objective_unscaled=unscaled,
        family=family,
        solution=sol,
        qp=qp,
    )


@dataclass(frozen=True)
class ResilienceReport:
    memberships: tuple[MembershipVerdict, ...]
    agreement: bool
    simplex: bool
    max_spread: float

    @property
    def all_members(self) -> bool:
        return all(v.is_member for v in self.memberships)

    @property
    def passed(self) -> bool:
        return self.all_members and self.agreement and self.simplex


def verify_resilience(
    problem: ResilienceProblem,
    result: CombinationResult,
    tol: float = DEFAULT_MEMBERSHIP_TOL,
) -> ResilienceReport:
    """Independently re-check a combination result.

    Membership of ``u`` is tested against the hull of every subset in the
    result's family; witnesses must agree with ``u`` and each weight block
    must lie on its simplex, all within ``tol``.
    """
    family = result.family
    verdicts = tuple(hull_membership(problem.points[list(s)], result.u, tol) for s in family)
    spread = float(np.max(np.linalg.norm(np.atleast_2d(result.witnesses) - result.u, axis=1)))
    sizes = [len(s) for s in family]
    blocks = np.split(np.asarray(result.beta), np.cumsum(sizes)[:-1])
    simplex = all(b.min() >= -tol and abs(b.sum() - 1.0) <= tol for b in blocks)
    return ResilienceReport(verdicts, spread <= tol, simplex, spread)
