"""Assignment solvers and label generation.

- `exhaustive_solve`: scores every assignment satisfying the one-SPV-per-
  request constraints and returns the global optimum (lexicographically
  smallest serving-SPV choice vector among ties).
- `nearest_heuristic`: geography-only baseline, each request to its nearest
  active unblocked SPV.
- `reformulated_solve`: best-first branch-and-bound over the auxiliary
  served-indicator formulation; exact when the search completes within its
  node budget.
- `label_dataset`: converts exhaustive optima into per-SPV multi-hot class
  labels for supervised training.
"""

from __future__ import annotations

import heapq
import time
from dataclasses import dataclass, field

import numpy as np

from .channel import ChannelConfig
from .geometry import blockage_indicator
from .linkmodel import Assignment, LinkTables, validate_assignment
from .scenario import ServiceRequirements, Topology

EXHAUSTIVE_BUDGET = 10 ** 8
CHUNK = 1 << 17


@dataclass
class SolverResult:
    assignment: Assignment
    objective: int
    nodes_explored: int
    wall_time: float
    optimal: bool = True

    def __post_init__(self):
        violations = validate_assignment(self.assignment)
        if violations:
            raise ValueError(f"solver produced invalid assignment: {violations}")


@dataclass
class LabeledExample:
    """Exhaustive-search supervision for one topology.

    z has one row per SPV and M+N+1 columns: positions 0..M-1 flag served
    comm vehicles (id order), M..M+N-1 served sensing vehicles, and the last
    column is the exclusive no-service class. A row serving both a comm and a
    sensing vehicle carries two ones.
    """

    topology_index: int
    topology_seed: int
    z: np.ndarray
    optimal_objective: int
    comm_choice: np.ndarray = field(default=None)
    sense_choice: np.ndarray = field(default=None)


def _decode_choices(indices: np.ndarray, num_spv: int, digits: int) -> np.ndarray:
    """Mixed-radix decode of enumeration indices into serving-SPV digits,
    most significant digit first (so index order is lexicographic order)."""
    out = np.empty((indices.shape[0], digits), dtype=np.int64)
    for j in range(digits):
        power = num_spv ** (digits - 1 - j)
        out[:, j] = (indices // power) % num_spv
    return out


def exhaustive_solve(topo: Topology, cfg: ChannelConfig, req: ServiceRequirements,
                     budget: int = EXHAUSTIVE_BUDGET,
                     tables: LinkTables | None = None) -> SolverResult:
    """Optimal assignment by scoring all U^(M+N) candidates.

    Ties break towards the lexicographically smallest serving-SPV choice
    vector (comm requests first, then sensing), i.e. lowest SPV indices win.
    """
    start = time.perf_counter()
    U, M, N = topo.num_spvs, topo.num_comm, topo.num_sense
    digits = M + N
    total = U ** digits
    if total > budget:
        raise ValueError(
            f"exhaustive search space U^(M+N) = {U}^{digits} = {total} exceeds "
            f"budget {budget}; use reformulated_solve (branch-and-bound) or a "
            f"smaller instance")
    if tables is None:
        tables = LinkTables(topo, cfg)

    best_obj = -1
    best_idx = 0
    for lo in range(0, total, CHUNK):
        hi = min(lo + CHUNK, total)
        idx = np.arange(lo, hi, dtype=np.int64)
        choices = _decode_choices(idx, U, digits)
        obj = tables.objective_batch(choices[:, :M], choices[:, M:], req)
        k = int(np.argmax(obj))
        if int(obj[k]) > best_obj:
            best_obj = int(obj[k])
            best_idx = lo + k
    choice = _decode_choices(np.array([best_idx], dtype=np.int64), U, digits)[0]
    assignment = Assignment.from_choices(U, choice[:M], choice[M:])
    return SolverResult(assignment=assignment, objective=best_obj,
                        nodes_explored=total,
                        wall_time=time.perf_counter() - start, optimal=True)


def nearest_heuristic(topo: Topology, cfg: ChannelConfig, req: ServiceRequirements,
                      tables: LinkTables | None = None) -> SolverResult:
    """Geography-only baseline: each request goes to the nearest active
    unblocked SPV, falling back to the nearest active SPV when every path is
    blocked, then to the nearest SPV overall. Distance ties pick the lowest
    SPV index."""
    start = time.perf_counter()
    spvs = sorted(topo.spvs, key=lambda s: s.id)
    requests = ([("comm", c) for c in sorted(topo.comm_requests, key=lambda c: c.id)]
                + [("sense", s) for s in sorted(topo.sense_requests, key=lambda s: s.id)])
    comm_choice, sense_choice = [], []
    for kind, reqv in requests:
        dists = np.array([s.pos.dist(reqv.pos) for s in spvs])
        active = np.array([s.active == 1 for s in spvs])
        clear = np.array([blockage_indicator(s.pos, reqv.pos, topo.obstacles) == 1
                          for s in spvs])
        for mask in (active & clear, active, np.ones(len(spvs), dtype=bool)):
            if mask.any():
                masked = np.where(mask, dists, np.inf)
                pick = int(np.argmin(masked))
                break
        (comm_choice if kind == "comm" else sense_choice).append(pick)
    assignment = Assignment.from_choices(len(spvs), comm_choice, sense_choice)
    if tables is None:
        tables = LinkTables(topo, cfg)
    obj = tables.objective_single(comm_choice, sense_choice, req)
    return SolverResult(assignment=assignment, objective=obj,
                        nodes_explored=len(requests),
                        wall_time=time.perf_counter() - start, optimal=False)


def reformulated_solve(topo: Topology, cfg: ChannelConfig, req: ServiceRequirements,
                       node_budget: int = 200_000,
                       tables: LinkTables | None = None) -> SolverResult:
    """Branch-and-bound over the served-indicator reformulation.

    Requests are assigned one at a time (comm in id order, then sensing);
    a partial assignment is bounded by its currently served count plus the
    number of still-unassigned requests, which is sound because activating an
    extra beam never raises any SINR. Exact whenever the search completes
    within the node budget; otherwise returns the incumbent with
    optimal=False.
    """
    start = time.perf_counter()
    U, M, N = topo.num_spvs, topo.num_comm, topo.num_sense
    digits = M + N
    if tables is None:
        tables = LinkTables(topo, cfg)

    def partial_served(choices: tuple[int, ...]) -> int:
        arr = np.full(digits, -1, dtype=np.int64)
        arr[:len(choices)] = choices
        return tables.objective_single(arr[:M], arr[M:], req)

    # Heap entries: (-bound, insertion sequence, choices, served-so-far).
    heap: list[tuple[int, int, tuple[int, ...], int]] = [(-digits, 0, (), 0)]
    seq = 1
    best_obj = -1
    best_choices: tuple[int, ...] | None = None
    nodes = 0
    truncated = False
    while heap:
        neg_bound, _, choices, served = heapq.heappop(heap)
        nodes += 1
        if -neg_bound <= best_obj:
            break  # best-first: no remaining node can improve
        if nodes > node_budget:
            truncated = True
            break
        k = len(choices)
        if k == digits:
            if served > best_obj:
                best_obj = served
                best_choices = choices
            continue
        child_arr = np.full((U, digits), -1, dtype=np.int64)
        for j, c in enumerate(choices):
            child_arr[:, j] = c
        child_arr[:, k] = np.arange(U)
        objs = tables.objective_batch(child_arr[:, :M], child_arr[:, M:], req)
        remaining = digits - k - 1
        for u in range(U):
            bound_u = int(objs[u]) + remaining
            if bound_u > best_obj:
                heapq.heappush(heap, (-bound_u, seq, choices + (u,), int(objs[u])))
                seq += 1

    if best_choices is None:
        # Budget too small to reach any leaf: fall back to the all-zeros
        # assignment so the result is still well formed.
        best_choices = tuple([0] * digits)
        best_obj = partial_served(best_choices)
        truncated = True
    assignment = Assignment.from_choices(U, list(best_choices[:M]),
                                         list(best_choices[M:]))
    return SolverResult(assignment=assignment, objective=best_obj,
                        nodes_explored=nodes,
                        wall_time=time.perf_counter() - start,
                        optimal=not truncated)


def labels_from_assignment(assignment: Assignment) -> np.ndarray:
    """Per-SPV multi-hot class labels for one optimal assignment."""
    U, M = assignment.alpha.shape
    N = assignment.beta.shape[1]
    z = np.zeros((U, M + N + 1), dtype=np.int64)
    z[:, :M] = assignment.alpha
    z[:, M:M + N] = assignment.beta
    idle = (z[:, :M + N].sum(axis=1) == 0)
    z[idle, M + N] = 1
    return z


def label_dataset(topologies: list[Topology], cfg: ChannelConfig,
                  req: ServiceRequirements,
                  budget: int = EXHAUSTIVE_BUDGET) -> list[LabeledExample]:
    """Exhaustively solve every topology and encode the optima as labels."""
    out = []
    for idx, topo in enumerate(topologies):
        res = exhaustive_solve(topo, cfg, req, budget=budget)
        out.append(LabeledExample(
            topology_index=idx,
            topology_seed=topo.seed,
            z=labels_from_assignment(res.assignment),
            optimal_objective=res.objective,
            comm_choice=res.assignment.comm_choice(),
            sense_choice=res.assignment.sense_choice(),
        ))
    return out
