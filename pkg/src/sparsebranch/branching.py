"""Scoring-based branching rules sharing the product score.

Rules expose ``select(ctx) -> var`` where ``ctx`` is a
:class:`~sparsebranch.bnb.BranchContext`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .bnb import DOWN, UP, BranchContext, PseudocostStats, update_pseudocosts
from .lp import INFEASIBLE, ITERATION_LIMIT, OPTIMAL, LpNumericalError, LpSolution, SimplexConfig, solve_bounds
from .model import ReducedView


@dataclass(frozen=True)
class ScoringConfig:
    epsilon: float = 1e-6
    large_gain: float = 1e8
    sb_iteration_limit: int | None = None
    reliability_threshold: int = 8

    def __post_init__(self):
        if self.epsilon <= 0:
            raise ValueError("epsilon must be positive")
        if self.reliability_threshold < 0:
            raise ValueError("reliability threshold must be non-negative")


@dataclass(eq=False)
class SbEvaluation:
    candidates: np.ndarray
    z: float                    # parent bound (minimisation form)
    z_minus: np.ndarray         # child bounds, +inf when infeasible
    z_plus: np.ndarray
    down_gain: np.ndarray
    up_gain: np.ndarray
    scores: np.ndarray
    down_infeasible: np.ndarray
    up_infeasible: np.ndarray
    iterations: int = 0
    tainted: bool = False

    @property
    def best(self) -> int:
        return pick_candidate(self.scores, self.candidates)


def product_score(down_gain, up_gain, cfg: ScoringConfig | None = None):
    """``max(down, eps) * max(up, eps)``; works elementwise on arrays."""
    eps = (cfg or ScoringConfig()).epsilon
    return np.maximum(down_gain, eps) * np.maximum(up_gain, eps)


def pick_candidate(scores, candidates) -> int:
    """Candidate with the highest score; ties go to the earliest position in ``candidates``.

    Candidate lists from the engine are sorted by variable index, so ties go
    to the lowest index unless a run seed has permuted the order.
    """
    scores = np.asarray(scores, dtype=float)
    if len(scores) == 0 or len(scores) != len(candidates):
        raise ValueError("scores and candidates must be nonempty and of equal length")
    return int(candidates[int(np.argmax(scores))])


def _child_bounds(view: ReducedView, j: int, xj: float):
    return (view.lb[j], math.floor(xj)), (math.ceil(xj), view.ub[j])


def strong_branch_scores(view: ReducedView, lp: LpSolution, candidates, cfg: ScoringConfig | None = None,
                         simplex: SimplexConfig | None = None) -> SbEvaluation:
    """Solve both child LPs of every candidate.

    Side-effect free: nothing found here (child incumbents, infeasibility
    information) leaves this function except through the returned record.
    """
    cfg = cfg or ScoringConfig()
    simplex = simplex or SimplexConfig()
    if cfg.sb_iteration_limit is not None:
        simplex = replace(simplex, iteration_limit=cfg.sb_iteration_limit)
    if lp.status != OPTIMAL:
        raise ValueError("strong branching needs an optimal parent LP")
    cands = np.asarray(candidates, dtype=np.int64)
    k = len(cands)
    zs = np.empty((2, k))
    infeas = np.zeros((2, k), dtype=bool)
    iters = 0
    tainted = False
    inst = view.base
    for pos, j in enumerate(cands):
        for side, (lo, hi) in enumerate(_child_bounds(view, int(j), lp.x_hat[j])):
            lb = view.lb.copy()
            ub = view.ub.copy()
            lb[j], ub[j] = lo, hi
            try:
                child = solve_bounds(inst, lb, ub, simplex, warm=lp)
            except LpNumericalError:
                tainted = True
                zs[side, pos] = lp.bound
                continue
            iters += child.iterations
            if child.status == INFEASIBLE:
                infeas[side, pos] = True
                zs[side, pos] = math.inf
            elif child.status in (OPTIMAL, ITERATION_LIMIT):
                zs[side, pos] = child.bound
            else:
                tainted = True
                zs[side, pos] = lp.bound
    gains = np.where(infeas, cfg.large_gain, zs - lp.bound)
    scores = product_score(gains[0], gains[1], cfg)
    return SbEvaluation(cands, lp.bound, zs[0], zs[1], gains[0], gains[1], scores,
                        infeas[0], infeas[1], iters, tainted)


def pseudocost_estimates(x_hat, candidates, stats: PseudocostStats):
    x = np.asarray(x_hat)[candidates]
    down = (x - np.floor(x)) * stats.pseudocosts(DOWN)[candidates]
    up = (np.ceil(x) - x) * stats.pseudocosts(UP)[candidates]
    return down, up


def pseudocost_scores(x_hat, candidates, stats: PseudocostStats, cfg: ScoringConfig | None = None):
    down, up = pseudocost_estimates(x_hat, candidates, stats)
    return product_score(down, up, cfg)


def reliability_scores(view: ReducedView, lp: LpSolution, candidates, stats: PseudocostStats,
                       cfg: ScoringConfig | None = None, simplex: SimplexConfig | None = None,
                       int_tol: float = 1e-6):
    """Pseudocost scores for reliable candidates, strong branching for the rest.

    Strong-branching gains are fed back into ``stats``.  Returns
    ``(scores, sb_mask, evaluation_or_None)``.
    """
    cfg = cfg or ScoringConfig()
    cands = np.asarray(candidates, dtype=np.int64)
    reliable = np.minimum(stats.count_down[cands], stats.count_up[cands]) >= cfg.reliability_threshold
    scores = np.zeros(len(cands))
    if reliable.any():
        scores[reliable] = pseudocost_scores(lp.x_hat, cands[reliable], stats, cfg)
    ev = None
    if (~reliable).any():
        sub = cands[~reliable]
        ev = strong_branch_scores(view, lp, sub, cfg, simplex)
        scores[~reliable] = ev.scores
        for pos, j in enumerate(sub):
            xj = lp.x_hat[j]
            update_pseudocosts(stats, int(j), DOWN, ev.down_gain[pos], xj - math.floor(xj),
                               infeasible=bool(ev.down_infeasible[pos]), int_tol=int_tol)
            update_pseudocosts(stats, int(j), UP, ev.up_gain[pos], math.ceil(xj) - xj,
                               infeasible=bool(ev.up_infeasible[pos]), int_tol=int_tol)
    return scores, ~reliable, ev


def learned_scores(model, features) -> np.ndarray:
    """Predicted normalised SB score per candidate row of ``features``."""
    return model.predict(features)


# ---------------------------------------------------------------------------
# rule objects

class BranchingRule:
    name = "rule"

    def __init__(self, cfg: ScoringConfig | None = None):
        self.cfg = cfg or ScoringConfig()
        self.last_source = self.name

    def reset(self, state):
        pass

    def select(self, ctx: BranchContext) -> int:
        raise NotImplementedError


class VanillaFullStrongBranching(BranchingRule):
    name = "vfs"

    def select(self, ctx):
        ev = strong_branch_scores(ctx.view, ctx.lp, ctx.candidates, self.cfg, ctx.state.config.simplex)
        ctx.state.clock.tick(ev.iterations + 2 * len(ctx.candidates))
        if ev.tainted:
            ctx.state.tainted_nodes += 1
        self.last_source = "sb"
        return pick_candidate(ev.scores, ctx.candidates)


class PseudocostBranching(BranchingRule):
    name = "pseudocost"

    def select(self, ctx):
        self.last_source = "pseudocost"
        return pick_candidate(pseudocost_scores(ctx.lp.x_hat, ctx.candidates, ctx.state.stats, self.cfg),
                              ctx.candidates)


class ReliabilityBranching(BranchingRule):
    name = "reliability"

    def select(self, ctx):
        scores, sb_mask, ev = reliability_scores(ctx.view, ctx.lp, ctx.candidates, ctx.state.stats,
                                                 self.cfg, ctx.state.config.simplex,
                                                 ctx.state.config.int_tol)
        if ev is not None:
            ctx.state.clock.tick(ev.iterations + 2 * int(sb_mask.sum()))
            if ev.tainted:
                ctx.state.tainted_nodes += 1
        self.last_source = "sb" if sb_mask.any() else "pseudocost"
        return pick_candidate(scores, ctx.candidates)


class RandomBranching(BranchingRule):
    name = "random"

    def select(self, ctx):
        self.last_source = "random"
        return int(ctx.candidates[ctx.state.rng.integers(len(ctx.candidates))])


class LearnedBranching(BranchingRule):
    """Branch on the candidate with the highest predicted SB score."""

    name = "learned"

    def __init__(self, model, cfg: ScoringConfig | None = None):
        super().__init__(cfg)
        self.model = model

    def select(self, ctx):
        from .features import extract_features_ctx
        X = extract_features_ctx(ctx)
        ctx.state.clock.tick(len(ctx.candidates))
        self.last_source = "model"
        return pick_candidate(learned_scores(self.model, X), ctx.candidates)


RULES = {
    "vfs": VanillaFullStrongBranching,
    "pseudocost": PseudocostBranching,
    "reliability": ReliabilityBranching,
    "random": RandomBranching,
}


def make_rule(spec: str, cfg: ScoringConfig | None = None) -> BranchingRule:
    """Build a rule from an identifier: ``vfs|pseudocost|reliability|random|model:<path>``."""
    if spec.startswith("model:"):
        from .learn import load_model
        return LearnedBranching(load_model(spec.split(":", 1)[1]), cfg)
    if spec not in RULES:
        raise ValueError(f"unknown branching rule {spec!r}")
    return RULES[spec](cfg)
