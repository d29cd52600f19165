import json
import warnings

import numpy as np
import pytest

from sparsebranch.bnb import SolverConfig, solve_mip
from sparsebranch.collect import (CandidateDataset, CollectingRule, CollectionConfig, SbDataTuple, assemble,
                                  assemble_seeds, collect, load_tuples, normalize_scores, save_tuples)
from sparsebranch.features import SCHEMA
from sparsebranch.generators import generate

from oracles import enumerate_mip


def tiny_suite(domain="sc", count=4):
    return [generate(domain, "tiny", seed=s) for s in range(count)]


def test_normalize_examples():
    assert list(normalize_scores([3, 4])) == [0.6, 0.8]
    assert list(normalize_scores([5])) == [1.0]
    assert list(normalize_scores([0, 0])) == [0, 0]


def test_config_validation():
    with pytest.raises(ValueError):
        CollectionConfig(sb_probability=0, target_tuples=5)
    with pytest.raises(ValueError):
        CollectionConfig(node_cap=0, target_tuples=5)
    with pytest.raises(ValueError):
        CollectionConfig()


def test_node_cap_bounds_tuples_per_solve():
    insts = [generate("sc", "small", seed=s) for s in range(2)]
    cfg = CollectionConfig(sb_probability=1.0, node_cap=10, target_tuples=25, seed=1)
    rep = collect(insts, cfg)
    per_solve = {}
    solve = 0
    last = None
    for t in rep.tuples:
        if last is not None and t.node_id <= last:
            solve += 1
        per_solve[solve] = per_solve.get(solve, 0) + 1
        last = t.node_id
    assert max(per_solve.values()) <= 10
    assert len(rep.tuples) >= 25


def test_collection_deterministic():
    insts = tiny_suite("ca")
    cfg = CollectionConfig(sb_probability=0.5, target_tuples=20, seed=3)
    a, b = collect(insts, cfg), collect(insts, cfg)
    assert [t.to_json() for t in a.tuples] == [t.to_json() for t in b.tuples]
    assert a.instance_draws == b.instance_draws


def test_candidate_target_stopping_rule():
    insts = [generate("sc", "small", seed=s) for s in range(2)]
    cfg = CollectionConfig(sb_probability=1.0, target_candidates=100, seed=0)
    rep = collect(insts, cfg)
    sizes = [len(t.candidates) for t in rep.tuples]
    assert sum(sizes) >= 100
    assert sum(sizes) - sizes[-1] < 100
    assert rep.reached_target


def test_unreachable_target_warns():
    with warnings.catch_warnings(record=True) as w:
        warnings.simplefilter("always")
        rep = collect(tiny_suite(count=1), CollectionConfig(target_tuples=10_000, instance_budget=2))
    assert not rep.reached_target and rep.solves == 2
    assert any("target not reached" in str(x.message) for x in w)


@pytest.mark.parametrize("domain", ["sc", "ca", "fl", "is"])
def test_tuple_invariants(domain):
    rep = collect(tiny_suite(domain), CollectionConfig(sb_probability=1.0, target_tuples=15, seed=2))
    assert rep.tuples
    for t in rep.tuples:
        assert len(t.candidates) >= 1
        assert t.X.shape == (len(t.candidates), len(SCHEMA))
        norm = np.linalg.norm(t.scores)
        assert norm == 0 or abs(norm - 1) <= 1e-9
        assert t.best == int(np.argmax(t.scores))
        assert t.scores.min() >= 0 and t.scores.max() <= 1


@pytest.mark.parametrize("domain", ["sc", "ca", "fl", "is"])
def test_sb_sampling_keeps_optimum(domain):
    for inst in tiny_suite(domain, 3):
        _, z, _ = enumerate_mip(inst)
        sink = []
        rule = CollectingRule(CollectionConfig(sb_probability=0.5, target_tuples=10 ** 6),
                              np.random.default_rng(0), sink, inst.name, lambda: True)
        res = solve_mip(inst, SolverConfig(), rule)
        assert res.incumbent_objective == pytest.approx(z, abs=1e-6)


def _fake_tuples(rows, per=5):
    out = []
    for i in range(rows // per):
        s = normalize_scores(np.arange(1, per + 1, dtype=float))
        X = np.full((per, len(SCHEMA)), float(i))
        out.append(SbDataTuple(f"i{i % 3}", i, np.arange(per), X, s, per - 1))
    return out


def test_assemble_sampling_contract():
    tuples = _fake_tuples(1000)
    a = assemble(tuples, {"train": 300}, seed=7)["train"]
    b = assemble(tuples, {"train": 300}, seed=7)["train"]
    assert len(a) == 300
    assert np.array_equal(a.row_ids, b.row_ids)
    c = assemble(tuples, {"train": 300}, seed=8)["train"]
    assert not np.array_equal(a.row_ids, c.row_ids)


def test_assemble_splits_disjoint():
    tuples = _fake_tuples(1000)
    for split in assemble_seeds(tuples, {"train": 500, "valid": 200, "test": 100}, seeds=(0, 1)):
        ids = [set(split[k].row_ids) for k in ("train", "valid", "test")]
        assert not (ids[0] & ids[1]) and not (ids[0] & ids[2]) and not (ids[1] & ids[2])


def test_small_scheme_keeps_collection_order():
    tuples = _fake_tuples(30_000)
    d = assemble(tuples, {"train": 30_000}, scheme="small")["train"]
    assert len(d) == 25_000
    assert np.array_equal(d.row_ids, np.arange(25_000))


def test_insufficient_pool():
    with pytest.raises(ValueError, match="short by 50"):
        assemble(_fake_tuples(100), {"train": 150})


def test_file_round_trips(tmp_path):
    rep = collect(tiny_suite(), CollectionConfig(sb_probability=1.0, target_tuples=8, seed=5))
    save_tuples(rep.tuples, tmp_path / "t.jsonl", {"domain": "sc"})
    back = load_tuples(tmp_path / "t.jsonl")
    assert [t.to_json() for t in back] == [t.to_json() for t in rep.tuples]
    ds = assemble(rep.tuples, {"train": 10}, seed=1, domain="sc")["train"]
    ds.save(tmp_path / "d.jsonl")
    head = json.loads((tmp_path / "d.jsonl").read_text().splitlines()[0])
    assert head["schema_hash"] == SCHEMA.hash and head["domain"] == "sc" and head["rows"] == 10
    again = CandidateDataset.load(tmp_path / "d.jsonl")
    assert np.array_equal(again.X, ds.X) and np.array_equal(again.y, ds.y)
    ds.save(tmp_path / "d2.jsonl")
    assert (tmp_path / "d.jsonl").read_bytes() == (tmp_path / "d2.jsonl").read_bytes()
