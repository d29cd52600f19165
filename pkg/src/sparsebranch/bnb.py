"""Branch-and-bound driver.

No presolve, cuts or primal heuristics: every node solves its LP relaxation
(warm-started from the parent basis), and the only source of incumbents is an
integral LP solution.  The branching decision is delegated to a rule object
with a ``select(ctx) -> var`` method (see :mod:`sparsebranch.branching`).
"""

from __future__ import annotations

import heapq
import json
import math
import time
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .lp import (INFEASIBLE, ITERATION_LIMIT, OPTIMAL, UNBOUNDED, LpNumericalError, LpSolution,
                 SimplexConfig, solve_bounds)
from .model import MipInstance, NodeBounds, ReducedView, reduce

DOWN, UP = "down", "up"

# one simplex pivot or one LP setup costs one tick; see Clock
WORK_SECONDS_PER_TICK = 1e-4


@dataclass
class PseudocostStats:
    """Per-variable branching history."""

    n: int
    sum_down: np.ndarray = None
    sum_up: np.ndarray = None
    count_down: np.ndarray = None
    count_up: np.ndarray = None
    infeas_down: np.ndarray = None
    infeas_up: np.ndarray = None
    branch_count: np.ndarray = None

    def __post_init__(self):
        for name in ("sum_down", "sum_up"):
            if getattr(self, name) is None:
                setattr(self, name, np.zeros(self.n))
        for name in ("count_down", "count_up", "infeas_down", "infeas_up", "branch_count"):
            if getattr(self, name) is None:
                setattr(self, name, np.zeros(self.n, dtype=np.int64))

    @property
    def phi_down(self) -> np.ndarray:
        return np.divide(self.sum_down, self.count_down, out=np.zeros(self.n),
                         where=self.count_down > 0)

    @property
    def phi_up(self) -> np.ndarray:
        return np.divide(self.sum_up, self.count_up, out=np.zeros(self.n), where=self.count_up > 0)

    def pseudocosts(self, direction: str) -> np.ndarray:
        """Pseudocosts with unobserved variables set to the mean of observed ones (1.0 if none)."""
        if direction == DOWN:
            phi, cnt = self.phi_down, self.count_down
        else:
            phi, cnt = self.phi_up, self.count_up
        seen = cnt > 0
        default = float(phi[seen].mean()) if seen.any() else 1.0
        return np.where(seen, phi, default)

    def infeasibility_fraction(self, direction: str) -> np.ndarray:
        inf = self.infeas_down if direction == DOWN else self.infeas_up
        return np.divide(inf, self.branch_count, out=np.zeros(self.n), where=self.branch_count > 0)

    def copy(self) -> "PseudocostStats":
        return PseudocostStats(self.n, *(getattr(self, k).copy() for k in (
            "sum_down", "sum_up", "count_down", "count_up", "infeas_down", "infeas_up",
            "branch_count")))

    def equals(self, other: "PseudocostStats") -> bool:
        return all(np.array_equal(getattr(self, k), getattr(other, k)) for k in (
            "sum_down", "sum_up", "count_down", "count_up", "infeas_down", "infeas_up",
            "branch_count"))


def update_pseudocosts(stats: PseudocostStats, var: int, direction: str, gain: float,
                       frac_dist: float, infeasible: bool = False, int_tol: float = 1e-6):
    """Record one branching observation; returns ``stats`` (updated in place)."""
    if infeasible:
        if direction == DOWN:
            stats.infeas_down[var] += 1
        else:
            stats.infeas_up[var] += 1
        return stats
    if frac_dist <= int_tol:
        return stats
    per_unit = max(gain, 0.0) / frac_dist
    if direction == DOWN:
        stats.sum_down[var] += per_unit
        stats.count_down[var] += 1
    else:
        stats.sum_up[var] += per_unit
        stats.count_up[var] += 1
    return stats


@dataclass(frozen=True)
class SolverConfig:
    time_limit: float = 3600.0
    node_limit: int = 1_000_000
    int_tol: float = 1e-6
    node_selection: str = "best_bound"
    branching_rule: str = "pseudocost"
    random_seed: int = 0
    clock: str = "wall"
    prune_tol: float = 1e-6
    simplex: SimplexConfig = field(default_factory=SimplexConfig)
    trace: bool = False

    def __post_init__(self):
        if self.time_limit <= 0 or self.node_limit <= 0:
            raise ValueError("time_limit and node_limit must be positive")
        if self.node_selection not in ("best_bound", "dfs"):
            raise ValueError(f"unknown node selection {self.node_selection!r}")
        if self.clock not in ("wall", "work"):
            raise ValueError("clock must be 'wall' or 'work'")


@dataclass(eq=False)
class BnbNode:
    id: int
    parent_id: Optional[int]
    depth: int
    bounds: NodeBounds
    lp_bound: float
    lp_solution: Optional[LpSolution] = None
    parent_lp: Optional[LpSolution] = None
    branch_var: Optional[int] = None
    branch_dir: Optional[str] = None
    frac_dist: float = 0.0


@dataclass
class SolveResult:
    status: str
    incumbent_objective: Optional[float]
    incumbent: Optional[np.ndarray]
    nodes_processed: int
    wall_time: float
    lp_iterations: int = 0
    work_ticks: int = 0
    root_bound: Optional[float] = None
    flagged: bool = False
    trace: Optional[list] = None

    def summary(self) -> dict:
        return {"status": self.status, "objective": self.incumbent_objective,
                "nodes": self.nodes_processed, "time": round(self.wall_time, 3),
                "lp_iterations": self.lp_iterations, "flagged": self.flagged}


class Clock:
    """Wall clock (monotonic) or deterministic work clock driven by tick counts."""

    def __init__(self, mode: str):
        self.mode = mode
        self.ticks = 0
        self.t0 = time.monotonic()

    def tick(self, k: int = 1):
        self.ticks += k

    def elapsed(self) -> float:
        if self.mode == "work":
            return self.ticks * WORK_SECONDS_PER_TICK
        return time.monotonic() - self.t0


@dataclass
class SearchState:
    """Mutable per-solve state that rules and the featurizer may read."""

    instance: MipInstance
    config: SolverConfig
    stats: PseudocostStats
    rng: np.random.Generator
    clock: Clock
    incumbent: Optional[np.ndarray] = None
    incumbent_bound: float = math.inf    # min-form objective of the incumbent
    incumbent_sum: Optional[np.ndarray] = None
    incumbent_count: int = 0
    var_lp_age: Optional[np.ndarray] = None
    row_lp_age: Optional[np.ndarray] = None
    stop_requested: bool = False
    tainted_nodes: int = 0

    @property
    def incumbent_average(self) -> Optional[np.ndarray]:
        if self.incumbent_count == 0:
            return None
        return self.incumbent_sum / self.incumbent_count


@dataclass
class BranchContext:
    state: SearchState
    view: ReducedView
    node: BnbNode
    lp: LpSolution
    candidates: np.ndarray

    @property
    def instance(self) -> MipInstance:
        return self.state.instance


def fractional_candidates(lp: LpSolution, instance: MipInstance, int_tol=1e-6) -> np.ndarray:
    x = lp.x_hat
    frac = np.abs(x - np.round(x)) > int_tol
    return np.flatnonzero(frac & instance.integrality)


def _key(node: BnbNode, mode: str):
    if mode == "dfs":
        return (-node.depth, node.id)
    return (node.lp_bound, node.id)


def select_node(frontier, mode: str = "best_bound") -> BnbNode:
    """Pick the next node: minimal bound (best_bound) or deepest (dfs), ties by lowest id."""
    frontier = list(frontier)
    if not frontier:
        raise ValueError("select_node called with an empty frontier")
    return min(frontier, key=lambda nd: _key(nd, mode))


def _update_ages(state: SearchState, lp: LpSolution, int_tol: float):
    zero = np.abs(lp.x_hat) <= int_tol
    state.var_lp_age = np.where(zero, state.var_lp_age + 1, 0)
    inst = state.instance
    if inst.m:
        act = lp.row_activity
        tight = (np.abs(act - inst.row_lo) <= 1e-6) | (np.abs(act - inst.row_hi) <= 1e-6)
        state.row_lp_age = np.where(tight, 0, state.row_lp_age + 1)


def solve_mip(instance: MipInstance, config: SolverConfig | None = None, rule=None,
              trace_path=None) -> SolveResult:
    """Solve ``instance`` by LP-based branch and bound with the given branching rule."""
    config = config or SolverConfig()
    if rule is None:
        from .branching import make_rule
        rule = make_rule(config.branching_rule)
    clock = Clock(config.clock)
    n = instance.n
    state = SearchState(instance, config, PseudocostStats(n),
                        np.random.default_rng(config.random_seed), clock,
                        var_lp_age=np.zeros(n, dtype=np.int64),
                        row_lp_age=np.zeros(instance.m, dtype=np.int64))
    if hasattr(rule, "reset"):
        rule.reset(state)
    mode = config.node_selection
    tol = config.prune_tol
    frontier: list = []
    counter = 0
    root = BnbNode(0, None, 0, NodeBounds(), -math.inf)
    heapq.heappush(frontier, (_key(root, mode), root))
    processed = 0
    lp_iters = 0
    flagged = False
    root_bound = None
    trace = [] if (config.trace or trace_path) else None
    status = None
    perm = None
    if config.random_seed:
        perm = np.random.default_rng([config.random_seed, 7]).permutation(n)

    while frontier:
        if processed >= config.node_limit:
            status = "node_limit"
            break
        if clock.elapsed() >= config.time_limit:
            status = "time_limit"
            break
        if state.stop_requested:
            status = "interrupted"
            break
        _, node = heapq.heappop(frontier)
        if node.lp_bound >= state.incumbent_bound - tol:
            continue
        view = reduce(instance, node.bounds)
        try:
            lp = solve_bounds(instance, view.lb, view.ub, config.simplex, warm=node.parent_lp)
        except LpNumericalError:
            flagged = True
            continue
        node.parent_lp = None
        processed += 1
        lp_iters += lp.iterations
        clock.tick(lp.iterations + 1)
        if node.branch_var is not None:
            if lp.status == INFEASIBLE:
                update_pseudocosts(state.stats, node.branch_var, node.branch_dir, 0.0, node.frac_dist,
                                   infeasible=True, int_tol=config.int_tol)
            elif lp.status == OPTIMAL:
                update_pseudocosts(state.stats, node.branch_var, node.branch_dir,
                                   lp.bound - node.lp_bound, node.frac_dist, int_tol=config.int_tol)
        if lp.status == INFEASIBLE:
            continue
        if lp.status == UNBOUNDED:
            if node.id == 0:
                status = "unbounded"
                break
            flagged = True
            continue
        if lp.status == ITERATION_LIMIT:
            flagged = True
            continue
        node.lp_solution = lp
        if node.id == 0:
            root_bound = lp.bound
        _update_ages(state, lp, config.int_tol)
        if lp.bound >= state.incumbent_bound - tol:
            continue
        cands = fractional_candidates(lp, instance, config.int_tol)
        if cands.size == 0:
            x = lp.x_hat.copy()
            x[instance.integrality] = np.round(x[instance.integrality])
            state.incumbent = x
            state.incumbent_bound = lp.bound
            state.incumbent_sum = x if state.incumbent_sum is None else state.incumbent_sum + x
            state.incumbent_count += 1
            if trace is not None:
                trace.append({"node": node.id, "parent": node.parent_id, "depth": node.depth,
                              "bound": lp.bound, "var": None, "source": "integral"})
            continue
        if perm is not None:
            cands = cands[np.argsort(perm[cands], kind="stable")]
        ctx = BranchContext(state, view, node, lp, cands)
        var = int(rule.select(ctx))
        if trace is not None:
            trace.append({"node": node.id, "parent": node.parent_id, "depth": node.depth,
                          "bound": lp.bound, "var": var,
                          "source": getattr(rule, "last_source", getattr(rule, "name", "rule"))})
        state.stats.branch_count[var] += 1
        xv = lp.x_hat[var]
        lo, hi = node.bounds.get(instance, var)
        fl, ce = math.floor(xv), math.ceil(xv)
        for direction, nlo, nhi, dist in ((DOWN, lo, fl, xv - fl), (UP, ce, hi, ce - xv)):
            counter += 1
            child = BnbNode(counter, node.id, node.depth + 1,
                            node.bounds.tighten(instance, var, nlo, nhi), lp.bound,
                            parent_lp=lp, branch_var=var, branch_dir=direction, frac_dist=dist)
            heapq.heappush(frontier, (_key(child, mode), child))

    if status is None:
        status = "optimal" if state.incumbent is not None else "infeasible"
    elapsed = clock.elapsed()
    if status == "time_limit":
        elapsed = config.time_limit
    obj = None if state.incumbent is None else instance.objective(state.incumbent)
    if trace_path is not None:
        with open(trace_path, "w") as fh:
            for rec in trace:
                fh.write(json.dumps(rec) + "\n")
    return SolveResult(status, obj, state.incumbent, processed,
                       elapsed, lp_iters, clock.ticks, root_bound, flagged or state.tainted_nodes > 0,
                       trace)
