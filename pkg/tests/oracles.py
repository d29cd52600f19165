"""Independent reference solvers used by the tests.

Nothing here calls the package's simplex or branch and bound.
"""

import itertools
import math

import numpy as np
from scipy.optimize import linprog

from sparsebranch.model import EQ, GE, LE, build_instance


def random_lp(rng, n=None, m=None, infeasible_share=0.0):
    """Small bounded LP instance with mixed row senses (no integrality)."""
    n = n or int(rng.integers(1, 7))
    m = m if m is not None else int(rng.integers(1, 7))
    lb = rng.integers(-4, 1, size=n).astype(float)
    ub = lb + rng.integers(1, 6, size=n)
    x0 = lb + rng.random(n) * (ub - lb)        # interior point keeps most LPs feasible
    rows = []
    for _ in range(m):
        a = rng.integers(-3, 4, size=n).astype(float)
        if not a.any():
            a[rng.integers(n)] = 1.0
        act = float(a @ x0)
        sense = [LE, GE, EQ][int(rng.integers(3)) if rng.random() < 0.3 else int(rng.integers(2))]
        slack = float(rng.integers(0, 4))
        if rng.random() < infeasible_share:
            slack = -slack - 50.0
        rhs = {LE: act + slack, GE: act - slack, EQ: act}[sense]
        rows.append(({j: a[j] for j in range(n) if a[j]}, sense, round(rhs, 3)))
    c = rng.integers(-5, 6, size=n).astype(float)
    sense = "min" if rng.random() < 0.5 else "max"
    return build_instance(sense, c, rows, lb, ub, np.zeros(n, bool))


def _halfspaces(inst):
    """Rows of (a, lo, hi) covering the row constraints."""
    A = inst.A
    lo = np.array([r.rhs if r.sense in (GE, EQ) else -np.inf for r in inst.rows])
    hi = np.array([r.rhs if r.sense in (LE, EQ) else np.inf for r in inst.rows])
    return A, lo, hi


def vertex_enumeration_lp(inst, tol=1e-7):
    """Best objective over all basic feasible points of a bounded LP.

    Every choice of ``n`` hyperplanes among rows and variable bounds is solved
    as a linear system (batched); feasible intersections are compared.
    Returns ``("optimal", z)`` or ``("infeasible", None)``.
    """
    n = inst.n
    A, lo, hi = _halfspaces(inst)
    planes = []          # (normal, value)
    for i in range(inst.m):
        planes.append((A[i], inst.rows[i].rhs))
    for j in range(n):
        e = np.zeros(n)
        e[j] = 1.0
        planes.append((e, inst.lb[j]))
        planes.append((e, inst.ub[j]))
    N = np.array([p[0] for p in planes])
    v = np.array([p[1] for p in planes], dtype=float)
    combos = np.array(list(itertools.combinations(range(len(planes)), n)))
    M = N[combos]                       # (K, n, n)
    b = v[combos]
    det = np.linalg.det(M)
    ok = np.abs(det) > 1e-9
    if not ok.any():
        return "infeasible", None
    X = np.linalg.solve(M[ok], b[ok][..., None])[..., 0]
    act = X @ A.T if inst.m else np.zeros((len(X), 0))
    feas = np.all(X >= inst.lb - tol, axis=1) & np.all(X <= inst.ub + tol, axis=1)
    if inst.m:
        feas &= np.all(act >= lo - tol, axis=1) & np.all(act <= hi + tol, axis=1)
    if not feas.any():
        return "infeasible", None
    z = X[feas] @ inst.c
    return "optimal", float(z.max() if inst.is_max else z.min())


def enumerate_mip(inst, tol=1e-7):
    """Exhaustive optimum of a MIP with bounded integer variables.

    Integer assignments are enumerated; when continuous variables exist the
    remaining LP is solved with HiGHS.  Returns ``(status, z, x)``.
    """
    ints = np.flatnonzero(inst.integrality)
    conts = np.flatnonzero(~inst.integrality)
    ranges = [range(int(math.ceil(inst.lb[j])), int(math.floor(inst.ub[j])) + 1) for j in ints]
    A, lo, hi = _halfspaces(inst)
    sign = -1.0 if inst.is_max else 1.0
    best, best_x = math.inf, None
    if conts.size == 0:
        pts = np.array(list(itertools.product(*ranges)), dtype=float).reshape(-1, len(ints))
        X = np.zeros((len(pts), inst.n))
        X[:, ints] = pts
        feas = np.ones(len(X), bool)
        if inst.m:
            act = X @ A.T
            feas = np.all(act >= lo - tol, axis=1) & np.all(act <= hi + tol, axis=1)
        if feas.any():
            z = sign * (X[feas] @ inst.c)
            k = int(np.argmin(z))
            best, best_x = float(z[k]), X[feas][k]
    else:
        Ac = A[:, conts]
        for vals in itertools.product(*ranges):
            xi = np.array(vals, dtype=float)
            fixed_act = A[:, ints] @ xi if inst.m else np.zeros(0)
            A_ub, b_ub, A_eq, b_eq = [], [], [], []
            for i in range(inst.m):
                if inst.rows[i].sense == EQ:
                    A_eq.append(Ac[i])
                    b_eq.append(inst.rows[i].rhs - fixed_act[i])
                else:
                    if np.isfinite(hi[i]):
                        A_ub.append(Ac[i])
                        b_ub.append(hi[i] - fixed_act[i])
                    if np.isfinite(lo[i]):
                        A_ub.append(-Ac[i])
                        b_ub.append(fixed_act[i] - lo[i])
            res = linprog(sign * inst.c[conts], A_ub=np.array(A_ub) if A_ub else None,
                          b_ub=np.array(b_ub) if b_ub else None,
                          A_eq=np.array(A_eq) if A_eq else None, b_eq=np.array(b_eq) if b_eq else None,
                          bounds=list(zip(inst.lb[conts], inst.ub[conts])), method="highs")
            if res.status == 0:
                z = float(sign * (inst.c[ints] @ xi)) + res.fun
                if z < best:
                    x = np.zeros(inst.n)
                    x[ints] = xi
                    x[conts] = res.x
                    best, best_x = z, x
    if best_x is None:
        return "infeasible", None, None
    return "optimal", sign * best, best_x


def random_binary_mip(rng, n=None, m=None):
    """Random packing/covering mix over binaries."""
    n = n or int(rng.integers(2, 13))
    m = m or int(rng.integers(1, 7))
    rows = []
    for _ in range(m):
        a = rng.integers(-2, 6, size=n).astype(float)
        if not a.any():
            a[0] = 1.0
        if rng.random() < 0.7:
            rows.append(({j: a[j] for j in range(n) if a[j]}, LE, float(max(1, a.clip(0).sum() // 2))
                         + 0.5 * rng.integers(0, 2)))
        else:
            rows.append(({j: abs(a[j]) for j in range(n) if a[j]}, GE, 1.0))
    c = rng.integers(-9, 10, size=n).astype(float)
    return build_instance("min" if rng.random() < 0.5 else "max", c, rows, np.zeros(n), np.ones(n),
                          np.ones(n, bool))
