import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from sparsebranch.bnb import (DOWN, UP, BnbNode, PseudocostStats, SolverConfig, select_node, solve_mip,
                              update_pseudocosts)
from sparsebranch.branching import LearnedBranching, make_rule
from sparsebranch.features import SCHEMA, QuadraticSchema
from sparsebranch.generators import generate
from sparsebranch.learn import SparseModel
from sparsebranch.model import LE, NodeBounds, build_instance

from oracles import enumerate_mip, random_binary_mip

RULES = ["vfs", "pseudocost", "reliability", "random"]


def violation_model():
    """Linear model scoring candidates by integrality violation."""
    j = SCHEMA.index["integrality_violation"]
    return SparseModel(QuadraticSchema([j], quadratic=False), 0.0, [0], [1.0])


def knap():
    return build_instance("min", [-1, -1], [({0: 1, 1: 1}, LE, 1.5)], [0, 0], [1, 1], [True, True])


@pytest.mark.parametrize("rule", RULES)
def test_knapsack_example(rule):
    res = solve_mip(knap(), SolverConfig(), make_rule(rule))
    assert res.status == "optimal"
    assert res.incumbent_objective == pytest.approx(-1)
    assert res.nodes_processed >= 3


def test_integral_root():
    inst = build_instance("min", [1, 1], [({0: 1, 1: 1}, LE, 2)], [0, 0], [1, 1], [True, True])
    res = solve_mip(inst)
    assert res.status == "optimal" and res.nodes_processed == 1


def test_infeasible_mip():
    inst = build_instance("min", [1, 1], [({0: 2, 1: 2}, LE, 3), ({0: 2, 1: 2}, ">=", 3)], [0, 0], [1, 1],
                          [True, True])
    res = solve_mip(inst)
    assert res.status == "infeasible" and res.incumbent is None


def test_select_node_rules():
    a = BnbNode(0, None, 2, NodeBounds(), -5.0)
    b = BnbNode(1, None, 7, NodeBounds(), -3.0)
    assert select_node([b, a]) is a
    c = BnbNode(2, None, 1, NodeBounds(), -5.0)
    assert select_node([c, a]) is a
    assert select_node([a, b], "dfs") is b
    with pytest.raises(ValueError):
        select_node([])


def test_pseudocost_updates():
    s = PseudocostStats(3)
    update_pseudocosts(s, 0, DOWN, 0.5, 0.25)
    assert s.phi_down[0] == 2 and s.count_down[0] == 1
    s2 = PseudocostStats(3)
    update_pseudocosts(s2, 1, UP, 2.0, 1.0)
    update_pseudocosts(s2, 1, UP, 2.0, 0.5)
    assert s2.phi_up[1] == 3 and s2.count_up[1] == 2
    update_pseudocosts(s2, 1, DOWN, 0.0, 0.5, infeasible=True)
    assert s2.infeas_down[1] == 1 and s2.count_down[1] == 0
    update_pseudocosts(s2, 2, DOWN, 1.0, 1e-9)
    assert s2.count_down[2] == 0
    update_pseudocosts(s2, 2, DOWN, -1e-12, 0.5)
    assert s2.phi_down[2] == 0


def test_pseudocost_initialization():
    s = PseudocostStats(3)
    assert list(s.pseudocosts(DOWN)) == [1.0, 1.0, 1.0]
    update_pseudocosts(s, 0, DOWN, 1.0, 0.5)
    update_pseudocosts(s, 1, DOWN, 1.0, 0.25)
    assert list(s.pseudocosts(DOWN)) == [2.0, 4.0, 3.0]


def test_config_validation():
    with pytest.raises(ValueError):
        SolverConfig(time_limit=0)
    with pytest.raises(ValueError):
        SolverConfig(node_selection="bfs")


def test_node_limit_and_time_limit():
    inst = generate("sc", "small", seed=1)
    res = solve_mip(inst, SolverConfig(node_limit=3), make_rule("pseudocost"))
    assert res.status == "node_limit" and res.nodes_processed == 3
    res = solve_mip(inst, SolverConfig(time_limit=0.005, clock="work"), make_rule("pseudocost"))
    assert res.status == "time_limit" and res.wall_time == 0.005


def _check_trace(res, inst):
    bound = {t["node"]: t["bound"] for t in res.trace}
    parent = {t["node"]: t["parent"] for t in res.trace}
    for nid, b in bound.items():
        p = parent[nid]
        if p is not None and p in bound:
            assert b >= bound[p] - 1e-6


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_rules_agree_with_enumeration(seed):
    rng = np.random.default_rng(seed)
    inst = random_binary_mip(rng)
    status, z, _ = enumerate_mip(inst)
    rules = [make_rule(r) for r in RULES] + [LearnedBranching(violation_model())]
    for rule in rules:
        res = solve_mip(inst, SolverConfig(trace=True, random_seed=int(seed % 5)), rule)
        if status == "infeasible":
            assert res.status == "infeasible"
            continue
        assert res.status == "optimal"
        assert res.incumbent_objective == pytest.approx(z, abs=1e-6)
        assert inst.is_feasible(res.incumbent)
        _check_trace(res, inst)


@pytest.mark.parametrize("domain", ["sc", "ca", "fl", "is"])
def test_deterministic(domain):
    inst = generate(domain, "tiny", seed=4)
    cfg = SolverConfig(trace=True, random_seed=3, clock="work")
    a = solve_mip(inst, cfg, make_rule("random"))
    b = solve_mip(inst, cfg, make_rule("random"))
    assert a.nodes_processed == b.nodes_processed
    assert a.trace == b.trace
    assert a.wall_time == b.wall_time


def test_dfs_same_answer():
    inst = generate("ca", "tiny", seed=8)
    a = solve_mip(inst, SolverConfig(), make_rule("pseudocost"))
    b = solve_mip(inst, SolverConfig(node_selection="dfs"), make_rule("pseudocost"))
    assert a.incumbent_objective == pytest.approx(b.incumbent_objective)


def test_trace_file(tmp_path):
    p = tmp_path / "trace.jsonl"
    res = solve_mip(knap(), SolverConfig(), make_rule("vfs"), trace_path=p)
    lines = p.read_text().splitlines()
    assert len(lines) == len(res.trace) >= 1
