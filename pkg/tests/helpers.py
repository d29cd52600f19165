"""Shared test utilities."""

import numpy as np

from sparsebranch.bnb import SolverConfig, solve_mip
from sparsebranch.branching import BranchingRule, pick_candidate, pseudocost_scores


class RecordingRule(BranchingRule):
    """Pseudocost branching that keeps every branching context it sees."""

    name = "recording"

    def __init__(self, limit=None):
        super().__init__()
        self.contexts = []
        self.limit = limit

    def select(self, ctx):
        if self.limit is None or len(self.contexts) < self.limit:
            self.contexts.append(ctx)
        return pick_candidate(pseudocost_scores(ctx.lp.x_hat, ctx.candidates, ctx.state.stats, self.cfg),
                              ctx.candidates)


def sample_contexts(instances, per_instance=10, node_limit=200):
    out = []
    for inst in instances:
        rule = RecordingRule(per_instance)
        solve_mip(inst, SolverConfig(node_limit=node_limit), rule)
        out += rule.contexts
    return out


def snapshot(state):
    inc = None if state.incumbent is None else state.incumbent.copy()
    return state.stats.copy(), inc, state.incumbent_bound


def same_snapshot(a, b):
    return (a[0].equals(b[0]) and a[2] == b[2]
            and ((a[1] is None and b[1] is None) or (a[1] is not None and b[1] is not None
                                                     and np.array_equal(a[1], b[1]))))
