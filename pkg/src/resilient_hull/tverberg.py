"""Brute-force search for Tverberg partitions.

Exponential in the number of points; intended as a test oracle and a
baseline for small neighborhoods only.
"""

from __future__ import annotations

import logging
from collections.abc import Iterator
from dataclasses import dataclass

import numpy as np

from ._arrays import as_points
from .qp import DEFAULT_TOL, QpStatus, solve_qp
from .resilient import agreement_system, closest_to_center_qp

log = logging.getLogger(__name__)

MAX_POINTS = 10
MAX_KAPPA = 3


@dataclass(frozen=True)
class PartitionCertificate:
    parts: tuple[tuple[int, ...], ...]
    witness: np.ndarray
    coefficients: tuple[np.ndarray, ...]


def restricted_growth_strings(m: int, blocks: int) -> Iterator[tuple[int, ...]]:
    """Yield restricted growth strings of length ``m`` using exactly ``blocks``
    distinct values, in lexicographic order.

    Each string ``a`` has ``a[0] = 0`` and ``a[i] <= max(a[:i]) + 1``; it
    encodes the set partition that puts ``i`` in block ``a[i]``.
    """
    if blocks < 1 or blocks > m:
        return
    a = [0] * m

    def rec(i, top):
        # top = max(a[:i]); the remaining slots must still reach `blocks`
        if i == m:
            if top == blocks - 1:
                yield tuple(a)
            return
        if (blocks - 1 - top) > (m - i):
            return
        for v in range(min(top + 1, blocks - 1) + 1):
            a[i] = v
            yield from rec(i + 1, max(top, v))

    yield from rec(1, 0)


def set_partitions(m: int, blocks: int) -> Iterator[tuple[tuple[int, ...], ...]]:
    for rgs in restricted_growth_strings(m, blocks):
        yield tuple(tuple(i for i in range(m) if rgs[i] == b) for b in range(blocks))


def common_point(points, parts, tol: float = DEFAULT_TOL):
    """Return ``(witness, coefficients)`` for a point shared by all part hulls,
    or ``None`` when the hulls do not intersect."""
    pts = as_points(points)
    shifted = pts - pts.mean(axis=0)
    spread = float(np.max(np.abs(shifted)))
    system = agreement_system(shifted / spread if spread > 0 else shifted, parts)
    sol = solve_qp(closest_to_center_qp(system), tol=tol)
    if sol.status is QpStatus.INFEASIBLE:
        return None
    if sol.status is not QpStatus.OPTIMAL:
        log.warning("agreement QP for partition %s ended with %s", parts, sol.status.value)
        return None
    coeffs = tuple(system.split(sol.beta))
    ys = np.array([c @ pts[list(part)] for c, part in zip(coeffs, parts)])
    return ys.mean(axis=0), coeffs


def find_tverberg(points, kappa: int, tol: float = DEFAULT_TOL) -> PartitionCertificate | None:
    """First partition into ``kappa + 1`` parts whose hulls share a point.

    Partitions are scanned in restricted-growth-string order.  Returns
    ``None`` when none works; that is only legitimate for fewer than
    ``kappa * (n + 1) + 1`` points, and is logged as a numerical problem
    otherwise.
    """
    pts = as_points(points)
    m, n = pts.shape
    kappa = int(kappa)
    if kappa < 1:
        raise ValueError("kappa must be at least 1")
    if m > MAX_POINTS or kappa > MAX_KAPPA:
        raise ValueError(f"enumeration bound exceeded (m <= {MAX_POINTS}, kappa <= {MAX_KAPPA})")
    for parts in set_partitions(m, kappa + 1):
        found = common_point(pts, parts, tol)
        if found is not None:
            witness, coeffs = found
            return PartitionCertificate(parts, witness, coeffs)
    if tverberg_guaranteed(m, n, kappa):
        log.warning(
            "no Tverberg partition found although m=%d >= kappa*(n+1)+1=%d; "
            "this indicates a tolerance problem",
            m,
            kappa * (n + 1) + 1,
        )
    return None


def tverberg_guaranteed(m: int, n: int, kappa: int) -> bool:
    return m >= kappa * (n + 1) + 1
