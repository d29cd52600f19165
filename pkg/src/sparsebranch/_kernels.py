"""Compiled inner loops."""

import numpy as np
from numba import njit

AT_LOWER, BASIC, AT_UPPER, AT_ZERO = 0, 1, 2, 3

DUAL_OPTIMAL, DUAL_INFEASIBLE, DUAL_ITER_LIMIT, DUAL_NUMERICAL = 0, 1, 2, 3

_PIV_TOL = 1e-9
_DEGENERATE_SWITCH = 30


# The working matrix is [A  -I]; A is passed in CSC form (indptr, indices, data)
# with n structural columns, column n + i is -e_i.

@njit(cache=True)
def _row_times_matrix(v, indptr, indices, data, n, m):
    """``v @ [A  -I]``."""
    out = np.empty(n + m)
    for j in range(n):
        s = 0.0
        for p in range(indptr[j], indptr[j + 1]):
            s += v[indices[p]] * data[p]
        out[j] = s
    for i in range(m):
        out[n + i] = -v[i]
    return out


@njit(cache=True)
def _binv_times_column(Binv, j, indptr, indices, data, n, m):
    """``B^-1 [A  -I]_j``."""
    u = np.zeros(m)
    if j >= n:
        for i in range(m):
            u[i] = -Binv[i, j - n]
        return u
    for p in range(indptr[j], indptr[j + 1]):
        r = indices[p]
        a = data[p]
        for i in range(m):
            u[i] += Binv[i, r] * a
    return u


@njit(cache=True)
def basis_inverse(basis, indptr, indices, data, n, m):
    """Inverse of the basis matrix, inverting only the structural block.

    With rows split into R1 (covered by a basic logical) and R2, the permuted
    basis is ``[[P, 0], [Q, -I]]`` with ``P = A[R2, S]`` square, so its inverse
    is ``[[P^-1, 0], [Q P^-1, -I]]``.
    """
    logical_pos = np.full(m, -1, dtype=np.int64)
    struct_pos = np.empty(m, dtype=np.int64)
    k = 0
    for i in range(m):
        j = basis[i]
        if j >= n:
            logical_pos[j - n] = i
        else:
            struct_pos[k] = i
            k += 1
    r2 = np.empty(k, dtype=np.int64)
    r2_index = np.full(m, -1, dtype=np.int64)
    t = 0
    for r in range(m):
        if logical_pos[r] < 0:
            if t >= k:
                raise np.linalg.LinAlgError("singular basis")
            r2[t] = r
            r2_index[r] = t
            t += 1
    P = np.zeros((k, k))
    for a in range(k):
        j = basis[struct_pos[a]]
        for p in range(indptr[j], indptr[j + 1]):
            b = r2_index[indices[p]]
            if b >= 0:
                P[b, a] = data[p]
    Pinv = np.linalg.inv(P) if k > 0 else np.zeros((0, 0))
    Binv = np.zeros((m, m))
    for a in range(k):
        for b in range(k):
            Binv[struct_pos[a], r2[b]] = Pinv[a, b]
    # logical rows: (Q P^-1) on R2 columns, -1 on the own row
    for r in range(m):
        i = logical_pos[r]
        if i < 0:
            continue
        Binv[i, r] = -1.0
        for a in range(k):
            j = basis[struct_pos[a]]
            qa = 0.0
            for p in range(indptr[j], indptr[j + 1]):
                if indices[p] == r:
                    qa = data[p]
                    break
            if qa != 0.0:
                for b in range(k):
                    Binv[i, r2[b]] += qa * Pinv[a, b]
    return Binv


@njit(cache=True)
def _full_state(cost, basis, x, Binv, is_basic, indptr, indices, data, n, m):
    # x_B = -B^-1 N x_N
    rhs = np.zeros(m)
    for j in range(n):
        if not is_basic[j] and x[j] != 0.0:
            for p in range(indptr[j], indptr[j + 1]):
                rhs[indices[p]] += data[p] * x[j]
    for i in range(m):
        if not is_basic[n + i] and x[n + i] != 0.0:
            rhs[i] -= x[n + i]
    xB = -(Binv @ rhs)
    for i in range(m):
        x[basis[i]] = xB[i]
    cB = np.empty(m)
    for i in range(m):
        cB[i] = cost[basis[i]]
    y = cB @ Binv
    d = cost - _row_times_matrix(y, indptr, indices, data, n, m)
    for i in range(m):
        d[basis[i]] = 0.0
    return d


@njit(cache=True)
def dual_kernel(indptr, indices, data, n, cost, lo, hi, fixed, basis, status, x, Binv, since_refactor, refactor_every,
                tol_f, tol_d, iters, iter_limit, bland_rule, degenerate_run):
    """Bounded dual simplex from a dual-feasible basis.

    ``basis``, ``status`` and ``x`` are updated in place.  Returns
    ``(code, Binv, since_refactor, iters, degenerate_run)``.
    """
    m = Binv.shape[0]
    N = n + m
    is_basic = np.zeros(N, dtype=np.bool_)
    for i in range(m):
        is_basic[basis[i]] = True
    d = _full_state(cost, basis, x, Binv, is_basic, indptr, indices, data, n, m)
    while True:
        # leaving row
        r = -1
        best = 0.0
        bland = bland_rule or degenerate_run >= _DEGENERATE_SWITCH
        for i in range(m):
            j = basis[i]
            v = max(lo[j] - x[j], x[j] - hi[j])
            if v > tol_f:
                if bland:
                    if r < 0 or j < basis[r]:
                        r = i
                elif r < 0 or v > best:
                    r = i
                    best = v
        if r < 0:
            return DUAL_OPTIMAL, Binv, since_refactor, iters, degenerate_run
        if iters >= iter_limit:
            return DUAL_ITER_LIMIT, Binv, since_refactor, iters, degenerate_run
        jr = basis[r]
        to_lower = x[jr] < lo[jr]
        alpha = _row_times_matrix(Binv[r].copy(), indptr, indices, data, n, m)
        # entering column
        q = -1
        if bland:
            t_min = np.inf
            for j in range(N):
                if is_basic[j] or fixed[j]:
                    continue
                a = alpha[j]
                st = status[j]
                ok = False
                if st == AT_ZERO:
                    ok = abs(a) > _PIV_TOL
                elif to_lower:
                    ok = (st == AT_LOWER and a < -_PIV_TOL) or (st == AT_UPPER and a > _PIV_TOL)
                else:
                    ok = (st == AT_LOWER and a > _PIV_TOL) or (st == AT_UPPER and a < -_PIV_TOL)
                if not ok:
                    continue
                dd = abs(d[j])
                if (st == AT_LOWER and d[j] < 0) or (st == AT_UPPER and d[j] > 0):
                    dd = 0.0
                ratio = dd / abs(a)
                if ratio < t_min - 1e-12:
                    t_min = ratio
            # lowest index among ratios within 1e-12 of the minimum
            for j in range(N):
                if is_basic[j] or fixed[j]:
                    continue
                a = alpha[j]
                st = status[j]
                ok = False
                if st == AT_ZERO:
                    ok = abs(a) > _PIV_TOL
                elif to_lower:
                    ok = (st == AT_LOWER and a < -_PIV_TOL) or (st == AT_UPPER and a > _PIV_TOL)
                else:
                    ok = (st == AT_LOWER and a > _PIV_TOL) or (st == AT_UPPER and a < -_PIV_TOL)
                if not ok:
                    continue
                dd = abs(d[j])
                if (st == AT_LOWER and d[j] < 0) or (st == AT_UPPER and d[j] > 0):
                    dd = 0.0
                if dd / abs(a) <= t_min + 1e-12:
                    q = j
                    break
        else:
            # Harris two-pass: relaxed bound, then the largest pivot under it
            t_max = np.inf
            for j in range(N):
                if is_basic[j] or fixed[j]:
                    continue
                a = alpha[j]
                st = status[j]
                ok = False
                if st == AT_ZERO:
                    ok = abs(a) > _PIV_TOL
                elif to_lower:
                    ok = (st == AT_LOWER and a < -_PIV_TOL) or (st == AT_UPPER and a > _PIV_TOL)
                else:
                    ok = (st == AT_LOWER and a > _PIV_TOL) or (st == AT_UPPER and a < -_PIV_TOL)
                if not ok:
                    continue
                dd = abs(d[j])
                if (st == AT_LOWER and d[j] < 0) or (st == AT_UPPER and d[j] > 0):
                    dd = 0.0
                t = (dd + tol_d) / abs(a)
                if t < t_max:
                    t_max = t
            best_a = -1.0
            for j in range(N):
                if is_basic[j] or fixed[j]:
                    continue
                a = alpha[j]
                st = status[j]
                ok = False
                if st == AT_ZERO:
                    ok = abs(a) > _PIV_TOL
                elif to_lower:
                    ok = (st == AT_LOWER and a < -_PIV_TOL) or (st == AT_UPPER and a > _PIV_TOL)
                else:
                    ok = (st == AT_LOWER and a > _PIV_TOL) or (st == AT_UPPER and a < -_PIV_TOL)
                if not ok:
                    continue
                dd = abs(d[j])
                if (st == AT_LOWER and d[j] < 0) or (st == AT_UPPER and d[j] > 0):
                    dd = 0.0
                if dd / abs(a) <= t_max and abs(a) > best_a:
                    best_a = abs(a)
                    q = j
        if q < 0:
            return DUAL_INFEASIBLE, Binv, since_refactor, iters, degenerate_run
        if abs(d[q]) <= 1e-12:
            degenerate_run += 1
        else:
            degenerate_run = 0
        u = _binv_times_column(Binv, q, indptr, indices, data, n, m)
        piv = u[r]
        if abs(piv) < 1e-11:
            return DUAL_NUMERICAL, Binv, since_refactor, iters, degenerate_run
        target = lo[jr] if to_lower else hi[jr]
        delta = (x[jr] - target) / alpha[q]
        # primal update: entering moves by delta, basics by -delta * u
        for i in range(m):
            x[basis[i]] -= delta * u[i]
        x[q] += delta
        x[jr] = target
        # dual update
        theta = d[q] / alpha[q]
        for j in range(N):
            d[j] -= theta * alpha[j]
        # basis change
        status[jr] = AT_LOWER if (to_lower or fixed[jr]) else AT_UPPER
        status[q] = BASIC
        is_basic[jr] = False
        is_basic[q] = True
        basis[r] = q
        row = Binv[r] / piv
        for i in range(m):
            if i != r and u[i] != 0.0:
                f = u[i]
                for k in range(m):
                    Binv[i, k] -= f * row[k]
        Binv[r] = row
        d[q] = 0.0
        since_refactor += 1
        iters += 1
        if since_refactor >= refactor_every:
            Binv = basis_inverse(basis, indptr, indices, data, n, m)
            for i in range(m):
                for k in range(m):
                    if not np.isfinite(Binv[i, k]):
                        return DUAL_NUMERICAL, Binv, since_refactor, iters, degenerate_run
            since_refactor = 0
            d = _full_state(cost, basis, x, Binv, is_basic, indptr, indices, data, n, m)
