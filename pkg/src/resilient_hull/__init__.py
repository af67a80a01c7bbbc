"""Resilient convex combinations via intersections of convex hulls,
a brute-force Tverberg search, and a consensus simulator built on them."""

from .linalg import MembershipVerdict, hull_membership, kernel_projection
from .qp import KktResiduals, QpProblem, QpSolution, QpStatus, UnboundedError, kkt_residuals, solve_qp
from .resilient import (
    CombinationResult,
    EmptyIntersectionError,
    ResilienceProblem,
    SolverError,
    SubsetFamily,
    build_constraints,
    enumerate_subsets,
    resilient_combination,
    subset_count,
    verify_resilience,
)
from .sim import (
    AdversaryModel,
    AgentSpec,
    GraphSchedule,
    Metric,
    Role,
    SimConfig,
    SimTrace,
    SimulationError,
    UpdateLaw,
    attack_schedule,
    run,
    step,
)
from .tverberg import PartitionCertificate, find_tverberg

__version__ = "0.1.0"

__all__ = [
    "AdversaryModel",
    "AgentSpec",
    "CombinationResult",
    "EmptyIntersectionError",
    "GraphSchedule",
    "KktResiduals",
    "MembershipVerdict",
    "Metric",
    "PartitionCertificate",
    "QpProblem",
    "QpSolution",
    "QpStatus",
    "ResilienceProblem",
    "Role",
    "SimConfig",
    "SimTrace",
    "SimulationError",
    "SolverError",
    "SubsetFamily",
    "UnboundedError",
    "UpdateLaw",
    "attack_schedule",
    "build_constraints",
    "enumerate_subsets",
    "find_tverberg",
    "hull_membership",
    "kernel_projection",
    "kkt_residuals",
    "resilient_combination",
    "run",
    "solve_qp",
    "step",
    "subset_count",
    "verify_resilience",
]
