"""Synchronous multi-agent simulation of consensus-type updates under attack.

Every round each normal agent reads the round-``t`` states of its in-
neighbors (itself included) and writes its round-``t+1`` state.  Malicious
agents ignore their update law and broadcast a value drawn from an
:class:`AdversaryModel`.

Agent ids are 0-based.
"""

from __future__ import annotations

import enum
import logging
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .linalg import kernel_projection
from .qp import DEFAULT_TOL
from .resilient import EmptyIntersectionError, ResilienceProblem, resilient_combination

log = logging.getLogger(__name__)


class Role(str, enum.Enum):
    NORMAL = "Normal"
    MALICIOUS = "Malicious"


class UpdateLaw(str, enum.Enum):
    PLAIN = "PlainConsensus"
    RESILIENT = "ResilientConsensus"
    PROJECTED = "ProjectedLinear"
    RESILIENT_PROJECTED = "ResilientProjectedLinear"

    @property
    def projected(self) -> bool:
        return self in (UpdateLaw.PROJECTED, UpdateLaw.RESILIENT_PROJECTED)

    @property
    def resilient(self) -> bool:
        return self in (UpdateLaw.RESILIENT, UpdateLaw.RESILIENT_PROJECTED)


class SimulationError(RuntimeError):
    pass


@dataclass(frozen=True)
class GraphSchedule:
    """Periodic sequence of directed graphs.

    An edge ``(j, i)`` means agent ``i`` hears agent ``j``.  Self-loops are
    implicit.
    """

    num_agents: int
    frames: tuple[frozenset, ...]

    def __post_init__(self):
        if self.num_agents < 1:
            raise ValueError("num_agents must be positive")
        frames = tuple(frozenset((int(j), int(i)) for j, i in f) for f in self.frames)
        if not frames:
            raise ValueError("a schedule needs at least one frame")
        for f in frames:
            for j, i in f:
                if not (0 <= j < self.num_agents and 0 <= i < self.num_agents):
                    raise ValueError(f"edge ({j}, {i}) out of range for {self.num_agents} agents")
        object.__setattr__(self, "frames", frames)

    @property
    def period(self) -> int:
        return len(self.frames)

    def frame(self, t: int) -> frozenset:
        return self.frames[t % self.period]

    def neighbors(self, i: int, t: int) -> tuple[int, ...]:
        return neighbors_in(self.frame(t), i)


def neighbors_in(frame, i: int) -> tuple[int, ...]:
    return tuple(sorted({i} | {j for j, k in frame if k == i}))


def circulant_edges(num_normal: int, offsets: Sequence[int] = (1, 2, 4)) -> set[tuple[int, int]]:
    """Directed circulant backbone: agent ``i`` hears ``i + o`` for each offset ``o``."""
    edges = set()
    for i in range(num_normal):
        for o in offsets:
            j = (i + o) % num_normal
            if j != i:
                edges.add((j, i))
    return edges


def attack_schedule(
    num_normal: int,
    offsets: Sequence[int],
    targets: Sequence[Sequence[Sequence[int]]],
) -> GraphSchedule:
    """Circulant backbone plus malicious agents feeding chosen normals.

    ``targets[f][q]`` lists the normal agents that malicious agent ``q`` feeds
    in frame ``f``; malicious agents get ids from ``num_normal`` upward and
    only send.  A normal agent may hear at most one malicious agent per frame.
    """
    if not targets:
        raise ValueError("at least one frame is required")
    num_malicious = len(targets[0])
    backbone = circulant_edges(num_normal, offsets)
    frames = []
    for frame_targets in targets:
        if len(frame_targets) != num_malicious:
            raise ValueError("every frame must list targets for each malicious agent")
        edges = set(backbone)
        hit: set[int] = set()
        for q, group in enumerate(frame_targets):
            for t in group:
                if not 0 <= t < num_normal:
                    raise ValueError(f"target {t} is not a normal agent")
                if t in hit:
                    raise ValueError(f"normal agent {t} hears more than one malicious agent")
                hit.add(t)
                edges.add((num_normal + q, t))
        frames.append(frozenset(edges))
    return GraphSchedule(num_normal + num_malicious, tuple(frames))


def strided_targets(
    num_normal: int = 9,
    num_malicious: int = 2,
    attach: int = 2,
    stride: int = 3,
    period: int = 1,
) -> list[list[list[int]]]:
    """Targets for :func:`attack_schedule`: in frame ``f`` malicious agent
    ``q`` feeds ``f * num_malicious + q + s * stride`` for ``s < attach``."""
    return [
        [[(f * num_malicious + q + s * stride) % num_normal for s in range(attach)] for q in range(num_malicious)]
        for f in range(period)
    ]


@dataclass(frozen=True)
class AgentSpec:
    role: Role = Role.NORMAL
    update: UpdateLaw = UpdateLaw.PLAIN
    constraint: tuple[np.ndarray, np.ndarray] | None = None
    kappa: int = 0
    projector: np.ndarray | None = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "role", Role(self.role))
        object.__setattr__(self, "update", UpdateLaw(self.update))
        if self.kappa < 0:
            raise ValueError("kappa must be nonnegative")
        if self.constraint is not None:
            A = np.atleast_2d(np.asarray(self.constraint[0], dtype=float))
            b = np.atleast_1d(np.asarray(self.constraint[1], dtype=float))
            if A.shape[0] != b.shape[0]:
                raise ValueError("constraint A and b disagree in row count")
            object.__setattr__(self, "constraint", (A, b))
            object.__setattr__(self, "projector", kernel_projection(A))
        if self.role is Role.NORMAL and self.update.projected and self.constraint is None:
            raise ValueError(f"{self.update.value} requires a constraint (A, b)")


@dataclass(frozen=True)
class AdversaryModel:
    """What malicious agents broadcast each round.

    ``uniform_box`` draws independently per agent and round from
    ``[lo, hi]``; ``constant`` always sends ``value``; ``drift`` sends
    ``value + rate * t``.
    """

    kind: str = "uniform_box"
    lo: tuple[float, ...] = (0.0, 0.0)
    hi: tuple[float, ...] = (2.0, 2.0)
    value: tuple[float, ...] = (0.0, 0.0)
    rate: tuple[float, ...] = (0.0, 0.0)
    seed: int = 0

    def __post_init__(self):
        if self.kind not in ("uniform_box", "constant", "drift"):
            raise ValueError(f"unknown adversary kind {self.kind!r}")
        lo, hi = np.asarray(self.lo, float), np.asarray(self.hi, float)
        if self.kind == "uniform_box":
            if lo.shape != hi.shape or not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi))):
                raise ValueError("box bounds must be finite and of equal length")
            if np.any(lo > hi):
                raise ValueError("box requires lo <= hi componentwise")

    def broadcast(self, agent: int, t: int) -> np.ndarray:
        if self.kind == "uniform_box":
            rng = agent_rng(self.seed, agent, t)
            lo, hi = np.asarray(self.lo, float), np.asarray(self.hi, float)
            return lo + (hi - lo) * rng.random(lo.shape[0])
        if self.kind == "constant":
            return np.asarray(self.value, float).copy()
        return np.asarray(self.value, float) + np.asarray(self.rate, float) * t


def agent_rng(seed: int, agent: int, t: int) -> np.random.Generator:
    """Independent stream per (seed, agent, round); order of use is irrelevant."""
    return np.random.default_rng([int(seed), int(agent), int(t)])


@dataclass(frozen=True)
class Metric:
    """Disagreement measure over normal agents.

    ``consecutive``: half the sum of squared gaps between normal agents
    adjacent in id order.  ``distance``: half the summed squared distance
    of normal agents to ``target``.
    """

    kind: str = "consecutive"
    target: tuple[float, ...] | None = None

    def __post_init__(self):
        if self.kind not in ("consecutive", "distance"):
            raise ValueError(f"unknown metric {self.kind!r}")
        if self.kind == "distance" and self.target is None:
            raise ValueError("distance metric needs a target")

    def __call__(self, normal_states: np.ndarray) -> float:
        if self.kind == "consecutive":
            gaps = np.diff(normal_states, axis=0)
            return 0.5 * float(np.sum(gaps * gaps))
        diff = normal_states - np.asarray(self.target, float)
        return 0.5 * float(np.sum(diff * diff))


@dataclass(frozen=True)
class SimConfig:
    schedule: GraphSchedule
    agents: tuple[AgentSpec, ...]
    initial_states: np.ndarray
    rounds: int
    adversary: AdversaryModel = AdversaryModel()
    metric: Metric = Metric()
    tol: float = DEFAULT_TOL

    def __post_init__(self):
        agents = tuple(self.agents)
        x0 = np.array(self.initial_states, dtype=float)
        if x0.ndim != 2:
            raise ValueError("initial_states must be an (agents x n) array")
        if len(agents) != self.schedule.num_agents or x0.shape[0] != len(agents):
            raise ValueError("schedule, agent list and initial states disagree on the number of agents")
        if self.rounds < 0:
            raise ValueError("rounds must be nonnegative")
        n = x0.shape[1]
        for i, a in enumerate(agents):
            if a.role is not Role.NORMAL:
                continue
            if a.constraint is not None and a.constraint[0].shape[1] != n:
                raise ValueError(f"agent {i}: constraint has {a.constraint[0].shape[1]} columns, states have {n}")
            if a.update.resilient:
                for t in range(self.schedule.period):
                    deg = len(self.schedule.neighbors(i, t))
                    if deg < a.kappa + 1:
                        raise ValueError(
                            f"agent {i}: {deg} neighbors (self included) in frame {t}, "
                            f"needs at least kappa+1 = {a.kappa + 1}"
                        )
        object.__setattr__(self, "agents", agents)
        object.__setattr__(self, "initial_states", x0)

    @property
    def normal_ids(self) -> list[int]:
        return [i for i, a in enumerate(self.agents) if a.role is Role.NORMAL]


@dataclass
class SimTrace:
    states: np.ndarray  # (rounds + 1, agents, n)
    V: np.ndarray  # (rounds + 1,)
    statuses: list[list[str]]  # per round, per agent; round 0 is all "Initial"
    normal_ids: list[int]

    @property
    def rounds(self) -> int:
        return self.states.shape[0] - 1

    def count(self, status: str) -> int:
        return sum(row.count(status) for row in self.statuses)


def step(
    agents: Sequence[AgentSpec],
    states: np.ndarray,
    frame,
    t: int,
    adversary: AdversaryModel,
    tol: float = DEFAULT_TOL,
) -> tuple[np.ndarray, list[str]]:
    """Advance all agents from round ``t`` to ``t + 1``.

    Returns the new states and a per-agent status string (the QP status for
    resilient updates, ``"Trivial"`` when the neighborhood leaves nothing
    to solve, the law name otherwise).
    """
    nxt = np.empty_like(states)
    statuses = []
    for i, agent in enumerate(agents):
        if agent.role is Role.MALICIOUS:
            nxt[i] = adversary.broadcast(i, t + 1)
            statuses.append("Malicious")
            continue
        nbrs = neighbors_in(frame, i)
        if agent.update.resilient:
            prob = ResilienceProblem(states[list(nbrs)], (nbrs.index(i),), agent.kappa)
            try:
                res = resilient_combination(prob, tol=tol, strict=False)
            except EmptyIntersectionError as exc:
                raise SimulationError(
                    f"round {t}, agent {i}: empty intersection despite a trusted self label "
                    f"(numerical failure): {exc}"
                ) from exc
            v = res.u
            statuses.append("Trivial" if res.solution is None else res.status.value)
        else:
            v = states[list(nbrs)].mean(axis=0)
            statuses.append(agent.update.value)
        if agent.update.projected:
            x = states[i]
            nxt[i] = x - agent.projector @ (x - v)
        else:
            nxt[i] = v
    return nxt, statuses


def run(config: SimConfig) -> SimTrace:
    """Execute ``config.rounds`` synchronous rounds and record the trace."""
    x = config.initial_states.copy()
    for i, a in enumerate(config.agents):
        if a.role is Role.MALICIOUS:
            x[i] = config.adversary.broadcast(i, 0)
    normal = config.normal_ids
    states = [x]
    V = [config.metric(x[normal])]
    statuses = [["Initial"] * len(config.agents)]
    for t in range(config.rounds):
        x, st = step(config.agents, x, config.schedule.frame(t), t, config.adversary, config.tol)
        states.append(x)
        V.append(config.metric(x[normal]))
        statuses.append(st)
    return SimTrace(np.array(states), np.array(V), statuses, normal)


# Linear-equation data for the constrained consensus example.  Agents in
# each group of three share one equation; together they pin x = (1, 1).
LINEAR_EQUATIONS = (
    (((3.0, -1.0),), (2.0,)),
    (((3.0, -1.0),), (2.0,)),
    (((3.0, -1.0),), (2.0,)),
    (((0.0, 1.0),), (1.0,)),
    (((0.0, 1.0),), (1.0,)),
    (((0.0, 1.0),), (1.0,)),
    (((-1.0, 3.0),), (2.0,)),
    (((-1.0, 3.0),), (2.0,)),
    (((-1.0, 3.0),), (2.0,)),
)


def uniform_box_states(num: int, lo, hi, seed: int) -> np.ndarray:
    lo, hi = np.asarray(lo, float), np.asarray(hi, float)
    rng = np.random.default_rng([int(seed), 0x1D])
    return lo + (hi - lo) * rng.random((num, lo.shape[0]))


def states_on_constraints(constraints, seed: int, scale: float = 1.0) -> np.ndarray:
    """Least-norm solution of each ``A x = b`` plus a random kernel component."""
    rng = np.random.default_rng([int(seed), 0x2E])
    out = []
    for A, b in constraints:
        A = np.atleast_2d(np.asarray(A, float))
        b = np.atleast_1d(np.asarray(b, float))
        x_ln = A.T @ np.linalg.solve(A @ A.T, b)
        P = kernel_projection(A)
        out.append(x_ln + scale * (P @ rng.standard_normal(A.shape[1])))
    return np.array(out)
