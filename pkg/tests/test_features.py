from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from sparsebranch.bnb import SolverConfig, solve_mip
from sparsebranch.features import (N_FEATURES, SCHEMA, QuadraticSchema, expand_base, extract_features,
                                   extract_features_ctx, minmax_normalize, quadratic_expand)
from sparsebranch.generators import generate
from sparsebranch.lp import solve_lp
from sparsebranch.model import GE, LE, NodeBounds, build_instance, reduce

from helpers import RecordingRule, sample_contexts
from oracles import random_binary_mip

F = SCHEMA.index


def test_schema_shape():
    assert len(SCHEMA) == N_FEATURES == 101
    assert [d.id for d in SCHEMA.features] == list(range(101))
    assert len(set(SCHEMA.names)) == 101
    assert sum(SCHEMA.group_counts().values()) == 101
    counts = SCHEMA.group_counts()
    assert counts["active_constraint_coefficients"] == 24
    assert counts["one_to_all_ratios"] == 8
    assert counts["weighted_pseudocosts"] == 5
    assert counts["infeasibility_statistics"] == 4
    assert {d.source for d in SCHEMA.features} == {"K", "G"}
    js = SCHEMA.to_json()
    assert js[0] == {"id": 0, "name": "obj_coef", "source": SCHEMA.features[0].source,
                     "group": "objective_coefficient"}


def _hand_node():
    # x1 appears in a degree-2 row and a degree-4 row
    inst = build_instance("min", [-3, 1, 1, 1],
                          [({0: 1, 1: 1}, LE, 6), ({0: 1, 1: 1, 2: 1, 3: 1}, GE, 1)],
                          [0, 0, 0, 0], [5, 5, 5, 5], [True] * 4)
    view = reduce(inst)
    lp = solve_lp(view)
    x = lp.x_hat.copy()
    x[0] = 2.3
    return view, replace(lp, x_hat=x)


def test_hand_computed_features():
    view, lp = _hand_node()
    X = extract_features(view, lp, [0], normalize=False)
    row = X[0]
    assert row[F["floor_distance"]] == pytest.approx(0.3)
    assert row[F["ceil_distance"]] == pytest.approx(0.7)
    assert row[F["integrality_violation"]] == pytest.approx(0.3)
    deg = [row[F[n]] for n in ("degree_mean", "degree_std", "degree_min", "degree_max")]
    assert deg == pytest.approx([3, 1, 2, 4])
    assert row[F["n_constraints"]] == 2
    assert [row[F["obj_coef"]], row[F["obj_coef_pos"]], row[F["obj_coef_neg"]]] == [-3, 0, 3]
    assert row[F["type_integer"]] == 1 and row[F["type_binary"]] == 0


def test_fixed_variables_drop_out_of_degree():
    view, lp = _hand_node()
    inst = view.base
    fixed = reduce(inst, NodeBounds().tighten(inst, 3, lb=0, ub=0))
    X = extract_features(fixed, lp, [0], normalize=False)
    assert X[0, F["degree_max"]] == 3


def test_minmax_examples():
    assert list(minmax_normalize(np.array([[2.0], [4.0], [6.0]]), [0])[:, 0]) == [0, 0.5, 1]
    assert list(minmax_normalize(np.array([[5.0], [5.0]]), [0])[:, 0]) == [0, 0]
    one = minmax_normalize(np.array([[3.0, 7.0]]), [0, 1])
    assert list(one[0]) == [0, 0]


@settings(max_examples=100, deadline=None)
@given(st.integers(1, 8), st.floats(0.01, 100), st.floats(-50, 50), st.integers(0, 2**31))
def test_minmax_affine_invariance(k, a, b, seed):
    X = np.random.default_rng(seed).normal(size=(k, 5))
    base = minmax_normalize(X, [0, 1, 2, 3, 4])
    scaled = minmax_normalize(a * X + b, [0, 1, 2, 3, 4])
    assert np.allclose(base, scaled, atol=1e-8)


def test_quadratic_expand_examples():
    qs = QuadraticSchema([4, 9, 11])
    assert len(qs) == 9
    assert list(quadratic_expand([2.0, 3.0], QuadraticSchema([0, 1]))) == [2, 3, 4, 9, 6]
    assert len(QuadraticSchema([7])) == 2
    with pytest.raises(ValueError):
        quadratic_expand([1.0, 2.0, 3.0], QuadraticSchema([0, 1]))


@settings(max_examples=50, deadline=None)
@given(st.lists(st.integers(0, 100), min_size=1, max_size=15, unique=True))
def test_quadratic_schema_bijective(ids):
    qs = QuadraticSchema(ids)
    p = len(ids)
    assert len(qs) == p + p + p * (p - 1) // 2
    assert len(set(qs.terms)) == len(qs)
    for k, t in enumerate(qs.terms):
        assert qs.term_id(t) == k
    assert QuadraticSchema.from_json(qs.to_json()) == qs
    lin = QuadraticSchema(ids, quadratic=False)
    assert len(lin) == p


def test_expand_base_selects_active():
    qs = QuadraticSchema([1, 3])
    X = np.arange(2 * 101, dtype=float).reshape(2, 101)
    E = expand_base(X, qs)
    assert np.array_equal(E[:, 0], X[:, 1])
    assert np.array_equal(E[:, 4], X[:, 1] * X[:, 3])


def _manual_reduction(inst, fix_var, value):
    """Instance with ``fix_var`` removed and its contribution moved into the rhs."""
    keep = [j for j in range(inst.n) if j != fix_var]
    new = {j: t for t, j in enumerate(keep)}
    rows = []
    for row in inst.rows:
        coeffs = {new[j]: a for j, a in row.coeffs if j != fix_var}
        shift = sum(a * value for j, a in row.coeffs if j == fix_var)
        rows.append((coeffs, row.sense, row.rhs - shift))
    return build_instance(inst.objective_sense, inst.c[keep], rows, inst.lb[keep], inst.ub[keep],
                          inst.integrality[keep]), keep


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_fixed_variable_exclusion(seed):
    rng = np.random.default_rng(seed)
    inst = random_binary_mip(rng, n=int(rng.integers(3, 9)))
    f = int(rng.integers(inst.n))
    v = float(rng.integers(2))
    view = reduce(inst, NodeBounds().tighten(inst, f, lb=v, ub=v))
    red, keep = _manual_reduction(inst, f, v)
    if any(not row.coeffs for row in red.rows):
        return                      # rows emptied by the fixing are dropped from the view only
    lp = solve_lp(view)
    if lp.status != "optimal":
        return
    cands = [j for j in np.flatnonzero(np.abs(lp.x_hat - np.round(lp.x_hat)) > 1e-6) if j != f]
    if not cands:
        return
    shift = inst.A[:, f] * v
    lp2 = replace(lp, x_hat=lp.x_hat[keep], reduced_costs=lp.reduced_costs[keep],
                  basis_status=tuple(lp.basis_status[j] for j in keep),
                  row_activity=lp.row_activity - shift)
    new = {j: t for t, j in enumerate(keep)}
    X1 = extract_features(view, lp, cands)
    X2 = extract_features(reduce(red), lp2, [new[j] for j in cands])
    assert np.allclose(X1, X2, atol=1e-9)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_features_finite_on_fuzzed_instances(seed):
    rng = np.random.default_rng(seed)
    inst = random_binary_mip(rng)
    rule = RecordingRule(limit=5)
    solve_mip(inst, SolverConfig(node_limit=30), rule)
    for ctx in rule.contexts:
        X = extract_features_ctx(ctx)
        assert X.shape == (len(ctx.candidates), 101)
        assert np.isfinite(X).all()
        K = X[:, SCHEMA.k_ids]
        assert K.min() >= 0 and K.max() <= 1


@pytest.mark.parametrize("domain", ["sc", "ca", "fl", "is"])
def test_features_finite_on_generators(domain):
    ctxs = sample_contexts([generate(domain, "tiny", seed=s) for s in range(3)], per_instance=5)
    for ctx in ctxs:
        X = extract_features_ctx(ctx)
        assert np.isfinite(X).all()
        K = X[:, SCHEMA.k_ids]
        assert K.min() >= 0 and K.max() <= 1
