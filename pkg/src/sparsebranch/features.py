"""Candidate features for learning to branch.

101 features per fractional candidate, recomputed at every node on the reduced
formulation (fixed variables removed, their contributions moved into the row
right-hand sides).  Rows are read in ``a x <= b`` form: ``>=`` rows are negated,
equality rows kept as written.  Neighbouring-row information is aggregated per
candidate with mean / min / max (and count, std where listed).

Features tagged ``K`` are min-max scaled to [0, 1] across the candidates of a
node; ``G`` features are left as computed.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from itertools import combinations

import numpy as np

from .bnb import DOWN, UP, PseudocostStats
from .lp import LpSolution
from .model import ReducedView

SAFE_EPS = 1e-10
PC_RATIO_EPS = 1e-6
ACTIVE_TOL = 1e-6


# (group, source, member names)
_GROUPS = [
    ("objective_coefficient", "K", ["obj_coef", "obj_coef_pos", "obj_coef_neg"]),
    ("n_constraints", "K", ["n_constraints"]),
    ("constraint_degree", "K", ["degree_mean", "degree_std", "degree_min", "degree_max"]),
    ("signed_coefficients", "K", [f"{s}_coef_{t}" for s in ("pos", "neg")
                                  for t in ("count", "mean", "std", "min", "max")]),
    ("integrality_violation", "K", ["integrality_violation"]),
    ("ceiling_distance", "K", ["ceil_distance"]),
    ("floor_distance", "G", ["floor_distance"]),
    ("weighted_pseudocosts", "K", ["pc_down_weighted", "pc_up_weighted", "pc_ratio", "pc_sum",
                                   "pc_product"]),
    ("infeasibility_statistics", "K", ["infeas_down_count", "infeas_up_count", "infeas_down_frac",
                                       "infeas_up_frac"]),
    ("coef_rhs_ratios", "K", ["coef_rhs_pos_min", "coef_rhs_pos_max", "coef_rhs_neg_min",
                              "coef_rhs_neg_max"]),
    ("one_to_all_ratios", "K", [f"ratio_{a}_{b}_{t}" for a, b in (("pos", "pos"), ("pos", "neg"),
                                                                  ("neg", "pos"), ("neg", "neg"))
                                for t in ("min", "max")]),
    ("active_constraint_coefficients", "K", [f"active_w{w}_{t}" for w in (1, 2, 3, 4)
                                             for t in ("sum", "mean", "std", "max", "min", "count")]),
    ("type", "G", ["type_binary", "type_integer", "type_implied_integer", "type_continuous"]),
    ("has_bound", "G", ["has_lb", "has_ub"]),
    ("solution_at_bound", "G", ["sol_at_lb", "sol_at_ub"]),
    ("basis_status", "G", ["basis_lower", "basis_basic", "basis_upper", "basis_zero"]),
    ("reduced_cost", "G", ["reduced_cost"]),
    ("lp_age", "G", ["lp_age"]),
    ("solution_value", "G", ["solution_value"]),
    ("incumbent_value", "G", ["incumbent_value"]),
    ("average_incumbent_value", "G", ["avg_incumbent_value"]),
    ("constraint_coefficients", "G", ["coef_mean", "coef_min", "coef_max"]),
    ("objective_cosine_similarity", "G", ["cos_sim_mean", "cos_sim_min", "cos_sim_max"]),
    ("rhs", "G", ["rhs_mean", "rhs_min", "rhs_max"]),
    ("constraint_tightness", "G", ["tight_mean", "tight_min", "tight_max"]),
    ("dual_values", "G", ["dual_mean", "dual_min", "dual_max"]),
    ("row_lp_age", "G", ["row_age_mean", "row_age_min", "row_age_max"]),
]


@dataclass(frozen=True)
class FeatureDescriptor:
    id: int
    name: str
    source: str
    group: str


class FeatureSchema:
    """Ordered list of the 101 base features."""

    def __init__(self):
        descs = []
        for group, src, names in _GROUPS:
            for nm in names:
                descs.append(FeatureDescriptor(len(descs), nm, src, group))
        self.features = tuple(descs)
        self.names = tuple(d.name for d in descs)
        self.k_ids = np.array([d.id for d in descs if d.source == "K"])
        self.g_ids = np.array([d.id for d in descs if d.source == "G"])
        self.index = {d.name: d.id for d in descs}

    def __len__(self):
        return len(self.features)

    def group_counts(self) -> dict:
        counts: dict = {}
        for d in self.features:
            counts[d.group] = counts.get(d.group, 0) + 1
        return counts

    def to_json(self) -> list:
        return [{"id": d.id, "name": d.name, "source": d.source, "group": d.group}
                for d in self.features]

    @property
    def hash(self) -> str:
        return hashlib.sha256(json.dumps(self.to_json(), sort_keys=True).encode()).hexdigest()[:16]


SCHEMA = FeatureSchema()
N_FEATURES = len(SCHEMA)


class QuadraticSchema:
    """Expanded term list over the active base features.

    Terms are ordered singletons, squares, then pairs ``(i, j)`` with ``i < j``
    in lexicographic order.  ``quadratic=False`` keeps singletons only.
    """

    def __init__(self, active_ids, quadratic: bool = True, base: FeatureSchema = SCHEMA):
        self.active_ids = np.array(sorted(int(i) for i in active_ids), dtype=np.int64)
        self.quadratic = bool(quadratic)
        self.base = base
        act = self.active_ids.tolist()
        terms = [(i,) for i in act]
        if quadratic:
            terms += [(i, i) for i in act]
            terms += list(combinations(act, 2))
        self.terms = tuple(terms)
        self._term_index = {t: k for k, t in enumerate(terms)}
        pos = {b: k for k, b in enumerate(act)}
        self.left = np.array([pos[t[0]] for t in terms], dtype=np.int64)
        self.right = np.array([pos[t[1]] if len(t) == 2 else -1 for t in terms], dtype=np.int64)

    @property
    def p(self) -> int:
        return len(self.active_ids)

    def __len__(self):
        return len(self.terms)

    def term_id(self, term) -> int:
        return self._term_index[tuple(term)]

    def term_name(self, k: int) -> str:
        t = self.terms[k]
        names = self.base.names
        if len(t) == 1:
            return names[t[0]]
        if t[0] == t[1]:
            return f"{names[t[0]]}^2"
        return f"{names[t[0]]} x {names[t[1]]}"

    def to_json(self) -> dict:
        return {"base_hash": self.base.hash, "active_ids": self.active_ids.tolist(),
                "quadratic": self.quadratic}

    @classmethod
    def from_json(cls, d) -> "QuadraticSchema":
        if d.get("base_hash") not in (None, SCHEMA.hash):
            raise ValueError("feature schema hash mismatch")
        return cls(d["active_ids"], d["quadratic"])

    @property
    def hash(self) -> str:
        return hashlib.sha256(json.dumps(self.to_json(), sort_keys=True).encode()).hexdigest()[:16]

    def __eq__(self, other):
        return isinstance(other, QuadraticSchema) and self.to_json() == other.to_json()

    def __hash__(self):
        return hash(self.hash)


def quadratic_expand(values, schema: QuadraticSchema) -> np.ndarray:
    """Expand active-base rows (1-D row or 2-D matrix, last axis = active features)."""
    v = np.asarray(values, dtype=float)
    if v.shape[-1] != schema.p:
        raise ValueError(f"expected {schema.p} active base values, got {v.shape[-1]}")
    left = v[..., schema.left]
    right = np.where(schema.right >= 0, v[..., np.maximum(schema.right, 0)], 1.0)
    return left * right


def expand_base(X_base, schema: QuadraticSchema) -> np.ndarray:
    """Select the active columns of full 101-wide rows and expand them."""
    X_base = np.asarray(X_base, dtype=float)
    if X_base.shape[-1] != len(schema.base):
        raise ValueError(f"expected {len(schema.base)} base features, got {X_base.shape[-1]}")
    return quadratic_expand(X_base[..., schema.active_ids], schema)


def minmax_normalize(X, cols) -> np.ndarray:
    """Rescale ``cols`` of a per-node feature matrix to [0, 1]; constant columns become 0."""
    X = np.array(X, dtype=float)
    if X.shape[0] == 0:
        return X
    sub = X[:, cols]
    lo = sub.min(axis=0)
    span = sub.max(axis=0) - lo
    out = np.zeros_like(sub)
    nz = span > SAFE_EPS
    out[:, nz] = (sub[:, nz] - lo[nz]) / span[nz]
    X[:, cols] = out
    return X


def _sdiv(a, b):
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    ok = np.abs(b) >= SAFE_EPS
    return np.divide(a, b, out=np.zeros(np.broadcast(a, b).shape), where=ok)


def _mstats(V, M):
    """Column-wise (count, sum, mean, std, min, max) of ``V`` over the entries where ``M``."""
    cnt = M.sum(axis=0)
    Vm = np.where(M, V, 0.0)
    s = Vm.sum(axis=0)
    mean = _sdiv(s, cnt)
    var = _sdiv((np.where(M, V - mean, 0.0) ** 2).sum(axis=0), cnt)
    has = cnt > 0
    mn = np.where(has, np.where(M, V, np.inf).min(axis=0, initial=np.inf), 0.0)
    mx = np.where(has, np.where(M, V, -np.inf).max(axis=0, initial=-np.inf), 0.0)
    return cnt.astype(float), s, mean, np.sqrt(var), mn, mx


def extract_features(view: ReducedView, lp: LpSolution, candidates, stats: PseudocostStats | None = None,
                     incumbent=None, incumbent_avg=None, var_age=None, row_age=None,
                     normalize: bool = True) -> np.ndarray:
    """Feature matrix with one row per candidate (in the given order)."""
    inst = view.base
    cands = np.asarray(candidates, dtype=np.int64)
    k = len(cands)
    F = np.zeros((k, N_FEATURES))
    if k == 0:
        return F
    n = inst.n
    stats = stats or PseudocostStats(n)
    x = lp.x_hat
    xc = x[cands]

    free = view.free_vars
    R = view.active_rows
    A_le, _ = inst.le_form
    if inst.m and len(R):
        sign = np.array([-1.0 if s == ">=" else 1.0 for s in inst.senses])[R]
        Ar = A_le[np.ix_(R, free)]
        br = view.residual_rhs[R] * sign
        # candidate columns of the reduced rows
        Ac = A_le[np.ix_(R, cands)]
        act = lp.row_activity[R]
        tight = ((np.abs(act - inst.row_lo[R]) <= ACTIVE_TOL)
                 | (np.abs(act - inst.row_hi[R]) <= ACTIVE_TOL)).astype(float)
        duals = lp.duals[R]
        r_age = (row_age[R] if row_age is not None else np.zeros(len(R))).astype(float)
    else:
        Ar = np.zeros((0, len(free)))
        br = np.zeros(0)
        Ac = np.zeros((0, k))
        tight = duals = r_age = np.zeros(0)

    cF = inst.min_c[free]
    c_norm = float(np.linalg.norm(cF))
    nz = Ar != 0
    deg = nz.sum(axis=1).astype(float)
    rnorm = np.sqrt((Ar ** 2).sum(axis=1))
    pos_sum = np.where(Ar > 0, Ar, 0.0).sum(axis=1)
    neg_sum = np.where(Ar < 0, -Ar, 0.0).sum(axis=1)
    abs_sum = pos_sum + neg_sum
    cand_abs = np.abs(Ac).sum(axis=1)
    cos = _sdiv(Ar @ cF, rnorm * c_norm)
    b_norm = float(np.linalg.norm(br))

    M = Ac != 0
    col = lambda v: np.broadcast_to(np.asarray(v, dtype=float)[:, None], Ac.shape)
    Anorm = _sdiv(Ac, col(rnorm))
    absA = np.abs(Ac)

    c_j = inst.min_c[cands]
    F[:, 0] = c_j
    F[:, 1] = np.maximum(c_j, 0)
    F[:, 2] = np.maximum(-c_j, 0)
    F[:, 3] = M.sum(axis=0)
    _, _, mean, std, mn, mx = _mstats(col(deg), M)
    F[:, 4:8] = np.column_stack([mean, std, mn, mx])
    for base, mask in ((8, M & (Ac > 0)), (13, M & (Ac < 0))):
        cnt, _, mean, std, mn, mx = _mstats(Anorm, mask)
        F[:, base:base + 5] = np.column_stack([cnt, mean, std, mn, mx])

    floor_d = xc - np.floor(xc)
    ceil_d = np.ceil(xc) - xc
    F[:, 18] = np.minimum(floor_d, ceil_d)
    F[:, 19] = ceil_d
    F[:, 20] = floor_d

    pc_d = floor_d * stats.pseudocosts(DOWN)[cands]
    pc_u = ceil_d * stats.pseudocosts(UP)[cands]
    F[:, 21] = pc_d
    F[:, 22] = pc_u
    F[:, 23] = (pc_d + PC_RATIO_EPS) / (pc_u + PC_RATIO_EPS)
    F[:, 24] = pc_d + pc_u
    F[:, 25] = pc_d * pc_u

    F[:, 26] = stats.infeas_down[cands]
    F[:, 27] = stats.infeas_up[cands]
    F[:, 28] = stats.infeasibility_fraction(DOWN)[cands]
    F[:, 29] = stats.infeasibility_fraction(UP)[cands]

    ratio = _sdiv(Ac, col(br))
    for base, rmask in ((30, br > SAFE_EPS), (32, br < -SAFE_EPS)):
        _, _, _, _, mn, mx = _mstats(ratio, M & rmask[:, None])
        F[:, base] = mn
        F[:, base + 1] = mx

    pos = M & (Ac > 0)
    neg = M & (Ac < 0)
    cases = ((pos, pos_sum), (pos, neg_sum), (neg, pos_sum), (neg, neg_sum))
    for q, (mask, denom) in enumerate(cases):
        vals = _sdiv(absA, col(denom))
        _, _, _, _, mn, mx = _mstats(vals, mask)
        F[:, 34 + 2 * q] = mn
        F[:, 35 + 2 * q] = mx

    active = M & (tight[:, None] > 0)
    weights = (np.ones(len(R)), _sdiv(1.0, abs_sum), _sdiv(1.0, cand_abs), np.abs(duals))
    for q, w in enumerate(weights):
        cnt, s, mean, std, mn, mx = _mstats(col(w) * absA, active)
        wcount = np.where(active, col(w), 0.0).sum(axis=0)
        F[:, 42 + 6 * q:48 + 6 * q] = np.column_stack([s, mean, std, mx, mn, wcount])

    # G features
    integ = inst.integrality[cands]
    binary = integ & (inst.lb[cands] == 0) & (inst.ub[cands] == 1)
    F[:, 66] = binary
    F[:, 67] = integ & ~binary
    F[:, 68] = 0.0
    F[:, 69] = ~integ
    lb, ub = view.lb[cands], view.ub[cands]
    F[:, 70] = np.isfinite(lb)
    F[:, 71] = np.isfinite(ub)
    F[:, 72] = np.isfinite(lb) & (np.abs(xc - np.where(np.isfinite(lb), lb, 0)) <= ACTIVE_TOL)
    F[:, 73] = np.isfinite(ub) & (np.abs(xc - np.where(np.isfinite(ub), ub, 0)) <= ACTIVE_TOL)
    bs = lp.basis_status
    for q, nm in enumerate(("lower", "basic", "upper", "zero")):
        F[:, 74 + q] = [bs[j] == nm for j in cands]
    F[:, 78] = _sdiv(lp.reduced_costs[cands], c_norm)
    F[:, 79] = var_age[cands] if var_age is not None else 0.0
    F[:, 80] = xc
    F[:, 81] = incumbent[cands] if incumbent is not None else 0.0
    F[:, 82] = incumbent_avg[cands] if incumbent_avg is not None else 0.0
    for base, V in ((83, Anorm), (86, col(cos)), (89, col(_sdiv(br, rnorm))),
                    (92, col(tight)), (95, col(_sdiv(duals, b_norm))), (98, col(r_age))):
        _, _, mean, _, mn, mx = _mstats(V, M)
        F[:, base] = mean
        F[:, base + 1] = mn
        F[:, base + 2] = mx

    if normalize:
        F = minmax_normalize(F, SCHEMA.k_ids)
    np.nan_to_num(F, copy=False, nan=0.0, posinf=0.0, neginf=0.0)
    return F


def extract_features_ctx(ctx) -> np.ndarray:
    """Features for a branching context from the B&B engine."""
    st = ctx.state
    return extract_features(ctx.view, ctx.lp, ctx.candidates, st.stats, st.incumbent,
                            st.incumbent_average, st.var_lp_age, st.row_lp_age)
