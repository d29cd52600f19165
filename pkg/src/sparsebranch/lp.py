"""Bounded-variable revised simplex for LP relaxations.

Every row ``i`` gets a logical column ``s_i = a_i x`` whose bounds encode the
row sense, so the working system is ``[A  -I] w = 0`` with box bounds on all
``n + m`` columns.  The slack basis ``B = -I`` is always available as a start.

From-scratch solves start from the slack basis with each structural column at
the bound its cost favours.  When that basis is dual feasible (always the case
for boxed variables) the dual simplex runs directly; otherwise a composite
primal phase 1 (minimise the sum of bound violations of the basic columns)
precedes primal phase 2.  A dual-simplex infeasibility verdict is always
confirmed by primal phase 1.  Child solves
after a bound change reuse the parent basis, which stays dual feasible, and run
the dual simplex; anything unusual falls back to the primal method from the
same basis.

All internal quantities are in minimisation form.  ``LpSolution.z`` is reported
in the instance's own sense, ``LpSolution.bound`` in minimisation form.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._kernels import basis_inverse, DUAL_INFEASIBLE, DUAL_ITER_LIMIT, DUAL_NUMERICAL, DUAL_OPTIMAL, dual_kernel
from .model import MipInstance, ReducedView

AT_LOWER, BASIC, AT_UPPER, AT_ZERO = 0, 1, 2, 3
STATUS_NAMES = ("lower", "basic", "upper", "zero")

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"
ITERATION_LIMIT = "iteration_limit"

_PIV_TOL = 1e-9
_DEGENERATE_SWITCH = 30


class LpNumericalError(RuntimeError):
    """Basis factorization failed repeatedly."""


@dataclass(frozen=True)
class SimplexConfig:
    tol_feas: float = 1e-6
    tol_dual: float = 1e-6
    iteration_limit: int = 100_000
    pivot_rule: str = "dantzig"
    refactor_every: int = 50

    def __post_init__(self):
        if self.tol_feas <= 0 or self.tol_dual <= 0:
            raise ValueError("simplex tolerances must be positive")
        if self.iteration_limit <= 0:
            raise ValueError("iteration_limit must be positive")
        if self.pivot_rule not in ("bland", "dantzig"):
            raise ValueError(f"unknown pivot rule {self.pivot_rule!r}")


@dataclass(eq=False)
class LpSolution:
    status: str
    z: float                    # objective in the instance's sense
    bound: float                # objective in minimisation form
    x_hat: np.ndarray
    duals: np.ndarray           # per row, minimisation form (y = c_B B^-1)
    reduced_costs: np.ndarray   # per variable, minimisation form
    basis_status: tuple         # per variable, names from STATUS_NAMES
    row_status: tuple           # per row (logical column status)
    row_activity: np.ndarray
    iterations: int
    phase1_objective: float = 0.0
    basis: np.ndarray | None = None        # basic column ids by position
    col_status: np.ndarray | None = None   # int status of all n + m columns
    factor: tuple | None = None            # (B^-1, updates since refactor) for warm starts

    @property
    def optimal(self) -> bool:
        return self.status == OPTIMAL


def _lp_data(inst: MipInstance):
    cache = inst._dense
    if "lp" not in cache:
        m, n = inst.m, inst.n
        M = np.hstack([inst.A, -np.eye(m)]) if m else np.zeros((0, n))
        cost = np.concatenate([inst.min_c, np.zeros(m)])
        A = inst.A if m else np.zeros((0, n))
        nz_rows, nz_cols = np.nonzero(A.T)     # column-major order
        indptr = np.searchsorted(nz_rows, np.arange(n + 1)).astype(np.int64)
        csc = (indptr, nz_cols.astype(np.int64), A.T[nz_rows, nz_cols].astype(float))
        cache["lp"] = (np.ascontiguousarray(M), cost)
        cache["lp_csc"] = csc
    return cache["lp"]


class _Simplex:
    def __init__(self, inst: MipInstance, lb, ub, cfg: SimplexConfig):
        self.inst = inst
        self.cfg = cfg
        self.M, self.cost = _lp_data(inst)
        self.csc = inst._dense["lp_csc"]
        self.m, self.n = inst.m, inst.n
        self.N = self.n + self.m
        self.lo = np.concatenate([lb, inst.row_lo])
        self.hi = np.concatenate([ub, inst.row_hi])
        self.fixed = self.lo == self.hi
        self.iters = 0
        self.since_refactor = 0
        self.degenerate_run = 0
        self.phase1_obj = 0.0

    # -- basis handling -------------------------------------------------
    def set_slack_basis(self):
        """Slack basis with each structural at the bound its cost favours.

        With finite bounds on every structural this basis is dual feasible.
        """
        m, n = self.m, self.n
        self.basis = np.arange(n, n + m)
        self.status = np.full(self.N, AT_LOWER, dtype=np.int8)
        self.status[self.basis] = BASIC
        self.x = np.zeros(self.N)
        for j in range(n):
            self._place_nonbasic(j, prefer_upper=self.cost[j] < 0)
        self.Binv = -np.eye(m)
        self.since_refactor = 0

    def _place_nonbasic(self, j, prefer_upper):
        lo, hi = self.lo[j], self.hi[j]
        if prefer_upper and hi < math.inf:
            self.status[j], self.x[j] = AT_UPPER, hi
        elif lo > -math.inf:
            self.status[j], self.x[j] = AT_LOWER, lo
        elif hi < math.inf:
            self.status[j], self.x[j] = AT_UPPER, hi
        else:
            self.status[j], self.x[j] = AT_ZERO, 0.0

    def set_basis(self, basis, col_status, factor=None):
        """Install a warm-start basis; nonbasic columns are re-seated on the new bounds."""
        self.basis = np.array(basis, dtype=np.int64)
        self.status = np.array(col_status, dtype=np.int8)
        self.x = np.zeros(self.N)
        for j in np.flatnonzero(self.status != BASIC):
            st = self.status[j]
            self._place_nonbasic(j, prefer_upper=(st == AT_UPPER))
            if st == AT_ZERO and (self.lo[j] > -math.inf or self.hi[j] < math.inf):
                self._place_nonbasic(j, prefer_upper=False)
        if factor is not None:
            self.Binv = factor[0].copy()
            self.since_refactor = factor[1]
        else:
            self.refactor()

    def refactor(self):
        if self.m == 0:
            self.Binv = np.zeros((0, 0))
            return
        try:
            self.Binv = basis_inverse(self.basis, *self.csc, self.n, self.m)
        except np.linalg.LinAlgError:
            raise LpNumericalError("singular basis matrix") from None
        if not np.all(np.isfinite(self.Binv)):
            raise LpNumericalError("non-finite basis inverse")
        self.since_refactor = 0

    def compute_xB(self):
        xn = self.x.copy()
        xn[self.basis] = 0.0
        self.x[self.basis] = -(self.Binv @ (self.M @ xn)) if self.m else 0.0

    def pivot(self, r, q, u):
        """Column ``q`` replaces basic position ``r``; ``u = B^-1 a_q``."""
        piv = u[r]
        if abs(piv) < 1e-11:
            raise LpNumericalError("tiny pivot element")
        row = self.Binv[r] / piv
        self.Binv -= np.outer(u, row)
        self.Binv[r] = row
        self.basis[r] = q
        self.status[q] = BASIC
        self.since_refactor += 1
        if self.since_refactor >= self.cfg.refactor_every:
            self.refactor()

    def duals(self, cB):
        return cB @ self.Binv if self.m else np.zeros(0)

    def reduced_costs(self, cost, y):
        return cost - y @ self.M if self.m else cost.copy()

    def use_bland(self):
        return self.cfg.pivot_rule == "bland" or self.degenerate_run >= _DEGENERATE_SWITCH

    # -- primal simplex -------------------------------------------------
    def primal(self):
        """Phase 1 then phase 2 from the current basis."""
        st = self._primal_loop(phase1=True)
        if st != "feasible":
            return st
        return self._primal_loop(phase1=False)

    def _primal_loop(self, phase1):
        tol_f, tol_d = self.cfg.tol_feas, self.cfg.tol_dual
        zero_cost = np.zeros(self.N)
        while True:
            self.compute_xB()
            xB = self.x[self.basis]
            loB, hiB = self.lo[self.basis], self.hi[self.basis]
            below = xB < loB - tol_f
            above = xB > hiB + tol_f
            if phase1:
                self.phase1_obj = float(np.sum((loB - xB)[below]) + np.sum((xB - hiB)[above]))
                if not (below.any() or above.any()):
                    return "feasible"
                cB = np.where(below, -1.0, np.where(above, 1.0, 0.0))
                cost = zero_cost
            else:
                cB = self.cost[self.basis]
                cost = self.cost
            if self.iters >= self.cfg.iteration_limit:
                return ITERATION_LIMIT
            y = self.duals(cB)
            d = self.reduced_costs(cost, y)
            stat = self.status
            movable = ~self.fixed
            inc = movable & (((stat == AT_LOWER) | (stat == AT_ZERO)) & (d < -tol_d))
            dec = movable & (((stat == AT_UPPER) | (stat == AT_ZERO)) & (d > tol_d))
            elig = np.flatnonzero(inc | dec)
            if elig.size == 0:
                if phase1:
                    return INFEASIBLE
                return OPTIMAL
            if self.use_bland():
                q = int(elig[0])
            else:
                q = int(elig[np.argmax(np.abs(d[elig]))])
            dirn = 1.0 if inc[q] else -1.0
            u = self.Binv @ self.M[:, q] if self.m else np.zeros(0)
            g = -dirn * u   # rate of change of each basic variable
            ratios = np.full(self.m, math.inf)
            leave_upper = np.zeros(self.m, dtype=bool)
            dn = g < -_PIV_TOL
            up = g > _PIV_TOL
            if phase1:
                # infeasible basics stop at the bound they are violating
                m1 = dn & above
                ratios[m1] = (xB[m1] - hiB[m1]) / -g[m1]
                leave_upper[m1] = True
                m2 = dn & ~above & ~below
                ratios[m2] = (xB[m2] - loB[m2]) / -g[m2]
                m3 = up & below
                ratios[m3] = (loB[m3] - xB[m3]) / g[m3]
                m4 = up & ~above & ~below
                ratios[m4] = (hiB[m4] - xB[m4]) / g[m4]
                leave_upper[m4] = True
            else:
                ratios[dn] = (xB[dn] - loB[dn]) / -g[dn]
                ratios[up] = (hiB[up] - xB[up]) / g[up]
                leave_upper[up] = True
            np.maximum(ratios, 0.0, out=ratios)
            t_flip = self.hi[q] - self.lo[q]
            t_min = ratios.min() if self.m else math.inf
            if t_flip <= t_min:
                if t_flip == math.inf:
                    if phase1:
                        raise LpNumericalError("unbounded phase-1 ray")
                    return UNBOUNDED
                self.x[q] = self.hi[q] if dirn > 0 else self.lo[q]
                self.status[q] = AT_UPPER if dirn > 0 else AT_LOWER
                self.iters += 1
                self.degenerate_run = 0
                continue
            ties = np.flatnonzero(ratios <= t_min + 1e-12)
            if self.use_bland():
                r = int(ties[np.argmin(self.basis[ties])])
            else:
                r = int(ties[np.argmax(np.abs(g[ties]))])
            t = ratios[r]
            self.degenerate_run = self.degenerate_run + 1 if t <= 1e-12 else 0
            leaving = int(self.basis[r])
            self.x[q] += dirn * t
            if leave_upper[r]:
                self.status[leaving], self.x[leaving] = AT_UPPER, self.hi[leaving]
            else:
                self.status[leaving], self.x[leaving] = AT_LOWER, self.lo[leaving]
            if self.fixed[leaving]:
                self.status[leaving] = AT_LOWER
            self.pivot(r, q, u)
            self.iters += 1

    # -- dual simplex ---------------------------------------------------
    def dual_feasible(self):
        y = self.duals(self.cost[self.basis])
        d = self.reduced_costs(self.cost, y)
        tol = self.cfg.tol_dual
        st = self.status
        free = ~self.fixed
        bad = free & (((st == AT_LOWER) & (d < -tol)) | ((st == AT_UPPER) & (d > tol))
                      | ((st == AT_ZERO) & (np.abs(d) > tol)))
        return not bad.any()

    def dual(self):
        """Bounded dual simplex (compiled loop); needs a dual-feasible basis."""
        if self.m == 0:
            return OPTIMAL
        try:
            code, self.Binv, self.since_refactor, self.iters, self.degenerate_run = dual_kernel(
                *self.csc, self.n, self.cost, self.lo, self.hi, self.fixed, self.basis, self.status, self.x,
                self.Binv, self.since_refactor, self.cfg.refactor_every, self.cfg.tol_feas,
                self.cfg.tol_dual, self.iters, self.cfg.iteration_limit,
                self.cfg.pivot_rule == "bland", self.degenerate_run)
        except np.linalg.LinAlgError:
            raise LpNumericalError("singular basis matrix") from None
        if code == DUAL_NUMERICAL:
            raise LpNumericalError("tiny pivot or non-finite basis inverse")
        return {DUAL_OPTIMAL: OPTIMAL, DUAL_INFEASIBLE: INFEASIBLE,
                DUAL_ITER_LIMIT: ITERATION_LIMIT}[code]

    # -- result ---------------------------------------------------------
    def result(self, status, phase1_obj=0.0):
        inst = self.inst
        n, m = self.n, self.m
        cB = self.cost[self.basis]
        y = self.duals(cB)
        d = self.reduced_costs(self.cost, y)
        d[self.basis] = 0.0
        x = self.x.copy()
        bound = float(self.cost @ x)
        if status == INFEASIBLE:
            bound = math.inf
        elif status == UNBOUNDED:
            bound = -math.inf
        names = []
        for j in range(n):
            s = self.status[j]
            names.append("lower" if self.fixed[j] else STATUS_NAMES[s])
        row_names = tuple(STATUS_NAMES[s] for s in self.status[n:])
        z = -bound if inst.is_max else bound
        return LpSolution(
            status=status, z=z, bound=bound, x_hat=x[:n], duals=y, reduced_costs=d[:n],
            basis_status=tuple(names), row_status=row_names, row_activity=x[n:],
            iterations=self.iters, phase1_objective=phase1_obj,
            basis=self.basis.copy(), col_status=self.status.copy(),
            factor=(self.Binv.copy(), self.since_refactor) if status == OPTIMAL else None)


def _bounds_of(view):
    return view.lb, view.ub


def _solve_scratch(inst, lb, ub, cfg):
    sx = _Simplex(inst, lb, ub, cfg)
    if np.any(lb > ub):
        sx.set_slack_basis()
        return sx.result(INFEASIBLE, phase1_obj=float(np.max(lb - ub)))
    last_err = None
    for attempt in range(2):
        try:
            sx.set_slack_basis()
            if attempt:
                sx.degenerate_run = _DEGENERATE_SWITCH   # retry with Bland's rule
            if sx.dual_feasible():
                st = sx.dual()
                if st in (OPTIMAL, ITERATION_LIMIT):
                    return sx.result(st)
                sx.degenerate_run = _DEGENERATE_SWITCH if attempt else 0
            st = sx.primal()
            return sx.result(st, phase1_obj=sx.phase1_obj if st == INFEASIBLE else 0.0)
        except LpNumericalError as err:
            last_err = err
    raise LpNumericalError(f"simplex failed twice: {last_err}")


def solve_lp(view: ReducedView, config: SimplexConfig | None = None) -> LpSolution:
    """Solve the LP relaxation of a node from the slack basis."""
    cfg = config or SimplexConfig()
    return _solve_scratch(view.base, view.lb, view.ub, cfg)


def solve_bounds(inst: MipInstance, lb, ub, config=None, warm: LpSolution | None = None):
    """Solve with explicit bound arrays, warm-starting from ``warm`` when given."""
    cfg = config or SimplexConfig()
    lb = np.asarray(lb, float)
    ub = np.asarray(ub, float)
    if warm is None or warm.basis is None or warm.status != OPTIMAL:
        return _solve_scratch(inst, lb, ub, cfg)
    if np.any(lb > ub):
        return _solve_scratch(inst, lb, ub, cfg)
    sx = _Simplex(inst, lb, ub, cfg)
    try:
        sx.set_basis(warm.basis, warm.col_status, warm.factor)
        if sx.dual_feasible():
            st = sx.dual()
            if st == OPTIMAL:
                return sx.result(st)
            if st == ITERATION_LIMIT:
                # the dual objective is still a valid bound
                return sx.result(st)
            # dual unboundedness: confirm infeasibility with a primal phase 1
        sx.degenerate_run = 0
        st = sx.primal()
        return sx.result(st, phase1_obj=sx.phase1_obj if st == INFEASIBLE else 0.0)
    except LpNumericalError:
        return _solve_scratch(inst, lb, ub, cfg)


def resolve_child(parent: LpSolution, view: ReducedView, changed_var: int, new_bound,
                  config: SimplexConfig | None = None) -> LpSolution:
    """Re-solve after restricting ``changed_var`` to ``new_bound = (lb, ub)``."""
    lb = view.lb.copy()
    ub = view.ub.copy()
    lb[changed_var], ub[changed_var] = new_bound
    return solve_bounds(view.base, lb, ub, config, warm=parent)
