import json

import numpy as np
import pytest

from sparsebranch.bnb import SolverConfig, solve_mip
from sparsebranch.branching import make_rule
from sparsebranch.generators import (DOMAINS, PRESETS, GeneratorSpec, barabasi_albert, gen_cauction, gen_facility,
                                     gen_indset, gen_setcover, generate, instance_seeds, write_suite)
from sparsebranch.lp import solve_lp
from sparsebranch.model import EQ, GE, LE, load_instance, reduce

from oracles import enumerate_mip


def test_setcover_structure():
    inst = gen_setcover(GeneratorSpec("sc", dict(rows=20, cols=40, density=0.25), seed=1))
    assert (inst.m, inst.n) == (20, 40)
    assert inst.integrality.all() and inst.objective_sense == "min"
    A = inst.A
    assert all(r.sense == GE and r.rhs == 1 for r in inst.rows)
    assert (A != 0).sum(axis=1).min() >= 2
    assert (A != 0).any(axis=0).all()
    assert np.all(inst.c == np.round(inst.c)) and inst.c.min() >= 1


def test_setcover_full_density():
    inst = gen_setcover(GeneratorSpec("sc", dict(rows=5, cols=8, density=1.0, max_cost=20), seed=4))
    assert (inst.A != 0).all()
    _, z, x = enumerate_mip(inst)
    assert z == inst.c.min() and x.sum() == 1


def test_setcover_bad_density():
    with pytest.raises(ValueError):
        gen_setcover(GeneratorSpec("sc", dict(rows=5, cols=8, density=0.1)))
    with pytest.raises(ValueError):
        GeneratorSpec("sc", dict(rows=5, cols=8, density=1.5))


def test_cauction_structure():
    inst = gen_cauction(GeneratorSpec("ca", dict(items=10, bids=50), seed=3))
    assert (inst.m, inst.n) == (10, 50) and inst.objective_sense == "max"
    assert all(r.sense == LE and r.rhs == 1 for r in inst.rows)
    assert (inst.A != 0).any(axis=1).all()


def test_cauction_disjoint_single_item_bids():
    inst = gen_cauction(GeneratorSpec("ca", dict(items=6, bids=18, add_prob=0.0, max_sub_bids=0), seed=5))
    A = inst.A
    assert ((A != 0).sum(axis=0) == 1).all()
    expect = sum(inst.c[A[i] != 0].max() for i in range(inst.m))
    assert enumerate_mip(inst)[1] == pytest.approx(expect)
    res = solve_mip(inst, SolverConfig(), make_rule("vfs"))
    assert res.incumbent_objective == pytest.approx(expect)


def test_facility_structure():
    inst = gen_facility(GeneratorSpec("fl", dict(customers=5, facilities=5, ratio=2), seed=9))
    assert inst.n == 5 + 25 and inst.integrality.sum() == 5
    assert [r.sense for r in inst.rows] == [EQ] * 5 + [LE] * 5
    assert not inst.integrality[5:].any()


def test_facility_single_open_free():
    inst = gen_facility(GeneratorSpec("fl", dict(customers=4, facilities=1, ratio=2,
                                                 fixed_cost_scale=0.0), seed=2))
    lp = solve_lp(reduce(inst))
    _, z, _ = enumerate_mip(inst)
    assert lp.z == pytest.approx(z, abs=1e-6)


def test_indset_structure():
    inst = gen_indset(GeneratorSpec("is", dict(nodes=50, affinity=4), seed=2))
    assert inst.n == 50 and inst.objective_sense == "max"
    assert inst.m == 4 * (50 - 4)
    assert all(len(r.coeffs) == 2 and r.sense == LE and r.rhs == 1 for r in inst.rows)
    edges = barabasi_albert(50, 4, np.random.Generator(np.random.PCG64(2)))
    assert {tuple(j for j, _ in r.coeffs) for r in inst.rows} == set(edges)


def test_indset_edgeless():
    inst = gen_indset(GeneratorSpec("is", dict(nodes=9, affinity=0), seed=1))
    assert inst.m == 0
    assert solve_mip(inst).incumbent_objective == 9


def test_indset_clique_cover_same_optimum():
    a = gen_indset(GeneratorSpec("is", dict(nodes=12, affinity=2), seed=6))
    b = gen_indset(GeneratorSpec("is", dict(nodes=12, affinity=2, clique_cover=True), seed=6))
    assert enumerate_mip(a)[1] == enumerate_mip(b)[1]


@pytest.mark.parametrize("domain", DOMAINS)
def test_determinism(domain):
    assert generate(domain, "tiny", seed=21) == generate(domain, "tiny", seed=21)
    assert generate(domain, "small", seed=2) == generate(domain, "small", seed=2)


@pytest.mark.parametrize("domain", DOMAINS)
def test_presets_monotone(domain):
    sizes = ["tiny", "small", "medium", "large"]
    for a, b in zip(sizes[1:], sizes[2:]):
        for k, v in PRESETS[domain][a].items():
            assert PRESETS[domain][b][k] >= v


@pytest.mark.parametrize("domain", DOMAINS)
@pytest.mark.parametrize("size", ["tiny", "small"])
def test_generated_lp_feasible(domain, size):
    for s in range(3):
        inst = generate(domain, size, seed=s)
        inst.validate()
        assert solve_lp(reduce(inst)).status == "optimal"


@pytest.mark.parametrize("domain", DOMAINS)
def test_tiny_presets_small_enough(domain):
    for s in range(5):
        assert generate(domain, "tiny", seed=s).integrality.sum() <= 12


def test_write_suite(tmp_path):
    man = write_suite(tmp_path, "is", "tiny", 3, seed=7)
    data = json.loads((tmp_path / "manifest.json").read_text())
    assert data == man and len(data["instances"]) == 3
    seeds = instance_seeds(7, 3)
    for e, s in zip(data["instances"], seeds):
        assert e["seed"] == s
        assert load_instance(tmp_path / e["file"]) == generate("is", "tiny", s)
