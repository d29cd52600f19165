"""Strong-branching data collection and candidate-level dataset assembly."""

from __future__ import annotations

import json
import warnings
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from .bnb import SolverConfig, solve_mip
from .branching import BranchingRule, ScoringConfig, pick_candidate, pseudocost_scores, strong_branch_scores
from .features import SCHEMA, extract_features_ctx

TUPLE_FORMAT = "sparsebranch-tuples/1"
DATASET_FORMAT = "sparsebranch-dataset/1"
SMALL_SCHEME_TARGET = 25_000


@dataclass(frozen=True)
class CollectionConfig:
    scheme: str = "large"
    sb_probability: float = 0.05
    node_cap: int = 1000
    candidate_cap: int | None = None       # per instance
    target_tuples: int | None = None
    target_candidates: int | None = None
    sb_every_node: bool = False
    instance_budget: int = 1000            # solves before giving up on the target
    seed: int = 0

    def __post_init__(self):
        if self.scheme not in ("large", "small"):
            raise ValueError(f"scheme must be 'large' or 'small', got {self.scheme!r}")
        if not 0 < self.sb_probability <= 1:
            raise ValueError("sb_probability must lie in (0, 1]")
        for name in ("node_cap", "candidate_cap", "target_tuples", "target_candidates",
                     "instance_budget"):
            v = getattr(self, name)
            if v is not None and v <= 0:
                raise ValueError(f"{name} must be positive")
        if self.target_tuples is None and self.target_candidates is None:
            raise ValueError("set target_tuples or target_candidates")


@dataclass(eq=False)
class SbDataTuple:
    instance_id: str
    node_id: int
    candidates: np.ndarray
    X: np.ndarray               # base features, one row per candidate
    scores: np.ndarray          # l2-normalized SB scores
    best: int                   # position of the SB choice within candidates

    def to_json(self) -> dict:
        return {"instance": self.instance_id, "node": int(self.node_id),
                "candidates": [int(c) for c in self.candidates],
                "X": [[float(v) for v in row] for row in self.X],
                "scores": [float(s) for s in self.scores], "best": int(self.best)}

    @classmethod
    def from_json(cls, d) -> "SbDataTuple":
        return cls(d["instance"], d["node"], np.array(d["candidates"], dtype=np.int64),
                   np.array(d["X"], dtype=float).reshape(len(d["candidates"]), -1),
                   np.array(d["scores"], dtype=float), d["best"])


def normalize_scores(raw) -> np.ndarray:
    raw = np.asarray(raw, dtype=float)
    norm = float(np.linalg.norm(raw))
    if norm == 0.0:
        return np.zeros_like(raw)
    return raw / norm


class CollectingRule(BranchingRule):
    """Full SB with some probability (recording a tuple), pseudocost otherwise."""

    name = "collect"

    def __init__(self, cfg: CollectionConfig, rng, sink, instance_id, budget,
                 scoring: ScoringConfig | None = None):
        super().__init__(scoring)
        self.ccfg = cfg
        self.rng = rng
        self.sink = sink
        self.instance_id = instance_id
        self.budget = budget                # callable: (tuple) -> keep going?
        self.cands_here = 0

    def select(self, ctx):
        p = 1.0 if self.ccfg.sb_every_node else self.ccfg.sb_probability
        if self.rng.random() < p:
            ev = strong_branch_scores(ctx.view, ctx.lp, ctx.candidates, self.cfg,
                                      ctx.state.config.simplex)
            ctx.state.clock.tick(ev.iterations + 2 * len(ctx.candidates))
            choice = pick_candidate(ev.scores, ctx.candidates)
            self.last_source = "sb"
            if not ev.tainted:
                X = extract_features_ctx(ctx)
                s = normalize_scores(ev.scores)
                tup = SbDataTuple(self.instance_id, ctx.node.id, np.array(ctx.candidates), X, s,
                                  int(np.argmax(s)))
                self.sink.append(tup)
                self.cands_here += len(ctx.candidates)
                cap = self.ccfg.candidate_cap
                if not self.budget() or (cap is not None and self.cands_here >= cap):
                    ctx.state.stop_requested = True
            return choice
        self.last_source = "pseudocost"
        return pick_candidate(pseudocost_scores(ctx.lp.x_hat, ctx.candidates, ctx.state.stats, self.cfg),
                              ctx.candidates)


@dataclass
class CollectionReport:
    tuples: list
    solves: int
    candidates: int
    reached_target: bool
    instance_draws: list = field(default_factory=list)


def collect(instances, cfg: CollectionConfig, solver_cfg: SolverConfig | None = None,
            instance_ids=None) -> CollectionReport:
    """Run collection solves on instances drawn uniformly with replacement."""
    if not instances:
        raise ValueError("no instances to collect from")
    solver_cfg = replace(solver_cfg or SolverConfig(), node_limit=cfg.node_cap, random_seed=0)
    ids = list(instance_ids) if instance_ids is not None else [
        inst.name or f"inst{i}" for i, inst in enumerate(instances)]
    rng = np.random.Generator(np.random.PCG64(cfg.seed))
    tuples: list = []
    n_cands = [0]

    class _Sink(list):
        def append(self, t):
            tuples.append(t)
            n_cands[0] += len(t.candidates)

    def keep_going():
        if cfg.target_tuples is not None and len(tuples) >= cfg.target_tuples:
            return False
        if cfg.target_candidates is not None and n_cands[0] >= cfg.target_candidates:
            return False
        return True

    draws = []
    solves = 0
    while keep_going() and solves < cfg.instance_budget:
        i = int(rng.integers(len(instances)))
        draws.append(i)
        rule = CollectingRule(cfg, rng, _Sink(), ids[i], keep_going)
        solve_mip(instances[i], solver_cfg, rule)
        solves += 1
    reached = not keep_going()
    if not reached:
        warnings.warn(f"collection target not reached after {solves} solves "
                      f"({len(tuples)} tuples, {n_cands[0]} candidates)")
    return CollectionReport(tuples, solves, n_cands[0], reached, draws)


# ---------------------------------------------------------------------------
# candidate-level datasets

@dataclass(eq=False)
class CandidateDataset:
    instance_ids: list
    node_ids: np.ndarray
    candidate_ids: np.ndarray
    row_ids: np.ndarray          # position in the pooled collection order
    X: np.ndarray
    y: np.ndarray
    split: str = "train"
    seed: int = 0
    domain: str = ""
    scheme: str = "large"

    def __len__(self):
        return len(self.y)

    def header(self) -> dict:
        return {"format": DATASET_FORMAT, "schema_hash": SCHEMA.hash, "domain": self.domain,
                "scheme": self.scheme, "seed": int(self.seed), "split": self.split,
                "rows": len(self)}

    def save(self, path) -> None:
        with open(path, "w") as fh:
            fh.write(json.dumps(self.header(), sort_keys=True) + "\n")
            for i in range(len(self)):
                fh.write(json.dumps({"row": int(self.row_ids[i]), "instance": self.instance_ids[i],
                                     "node": int(self.node_ids[i]),
                                     "candidate": int(self.candidate_ids[i]),
                                     "x": [float(v) for v in self.X[i]], "y": float(self.y[i])})
                         + "\n")

    @classmethod
    def load(cls, path) -> "CandidateDataset":
        with open(path) as fh:
            head = json.loads(fh.readline())
            if head.get("format") != DATASET_FORMAT:
                raise ValueError(f"{path}: not a candidate dataset")
            if head.get("schema_hash") != SCHEMA.hash:
                raise ValueError(f"{path}: feature schema hash mismatch")
            rows = [json.loads(line) for line in fh if line.strip()]
        X = np.array([r["x"] for r in rows], dtype=float).reshape(len(rows), len(SCHEMA))
        return cls([r["instance"] for r in rows], np.array([r["node"] for r in rows], dtype=np.int64),
                   np.array([r["candidate"] for r in rows], dtype=np.int64),
                   np.array([r["row"] for r in rows], dtype=np.int64), X,
                   np.array([r["y"] for r in rows], dtype=float), head["split"], head["seed"],
                   head["domain"], head["scheme"])


def _pool(tuples):
    inst, node, cand = [], [], []
    for t in tuples:
        inst += [t.instance_id] * len(t.candidates)
        node += [t.node_id] * len(t.candidates)
        cand += list(t.candidates)
    X = np.vstack([t.X for t in tuples]) if tuples else np.zeros((0, len(SCHEMA)))
    y = np.concatenate([t.scores for t in tuples]) if tuples else np.zeros(0)
    return inst, np.array(node, dtype=np.int64), np.array(cand, dtype=np.int64), X, y


def assemble(tuples, targets: dict, seed: int = 0, scheme: str = "large", domain: str = "") -> dict:
    """Split the pooled candidate rows into disjoint datasets, e.g. ``{"train": 300}``.

    The large scheme samples rows uniformly without replacement; the small scheme
    keeps rows in collection order (train first, capped at 25,000 rows).
    """
    inst, node, cand, X, y = _pool(tuples)
    total = len(y)
    targets = dict(targets)
    if scheme == "small" and "train" in targets:
        targets["train"] = min(targets["train"], SMALL_SCHEME_TARGET)
    need = sum(targets.values())
    if need > total:
        raise ValueError(f"candidate pool has {total} rows but {need} were requested "
                         f"(short by {need - total})")
    if scheme == "large":
        order = np.random.Generator(np.random.PCG64(seed)).permutation(total)
    elif scheme == "small":
        order = np.arange(total)
    else:
        raise ValueError(f"unknown scheme {scheme!r}")
    out = {}
    start = 0
    for split, count in targets.items():
        idx = order[start:start + count]
        if scheme == "large":
            idx = np.sort(idx)
        start += count
        out[split] = CandidateDataset([inst[i] for i in idx], node[idx], cand[idx], idx.astype(np.int64),
                                      X[idx], y[idx], split, seed, domain, scheme)
    return out


def assemble_seeds(tuples, targets: dict, seeds=(0, 1, 2, 3, 4), scheme="large", domain="") -> list:
    return [assemble(tuples, targets, s, scheme, domain) for s in seeds]


# ---------------------------------------------------------------------------
# tuple archives

def save_tuples(tuples, path, meta: dict | None = None) -> None:
    head = {"format": TUPLE_FORMAT, "schema_hash": SCHEMA.hash, "count": len(tuples), **(meta or {})}
    with open(path, "w") as fh:
        fh.write(json.dumps(head, sort_keys=True) + "\n")
        for t in tuples:
            fh.write(json.dumps(t.to_json()) + "\n")


def load_tuples(path) -> list:
    with open(path) as fh:
        head = json.loads(fh.readline())
        if head.get("format") != TUPLE_FORMAT:
            raise ValueError(f"{path}: not a tuple archive")
        if head.get("schema_hash") != SCHEMA.hash:
            raise ValueError(f"{path}: feature schema hash mismatch")
        return [SbDataTuple.from_json(json.loads(line)) for line in fh if line.strip()]


def config_dict(cfg: CollectionConfig) -> dict:
    return asdict(cfg)
