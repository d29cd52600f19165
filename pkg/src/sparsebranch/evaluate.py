"""Benchmark harness: run (method x instance x seed), aggregate, report."""

from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, replace
from pathlib import Path

import numpy as np
from scipy.stats import binomtest

from .bnb import SolverConfig, solve_mip
from .branching import make_rule, pick_candidate

SOLVED = ("optimal", "infeasible")


def shifted_geomean(values, shift: float = 1.0) -> float:
    """``exp(mean(log(v + shift))) - shift``."""
    v = np.asarray(values, dtype=float)
    if v.size == 0:
        raise ValueError("shifted_geomean of an empty list")
    if shift <= 0:
        raise ValueError("shift must be positive")
    if not np.all(np.isfinite(v)) or np.any(v < 0):
        raise ValueError("values must be finite and nonnegative")
    return float(np.exp(np.mean(np.log(v + shift))) - shift)


@dataclass(frozen=True)
class MetricConfig:
    shift: float = 1.0
    time_limit: float = 60.0
    seeds: int = 5
    impute_nodes: str = "max_solved"     # largest solved count in the same domain/size

    def __post_init__(self):
        if self.shift <= 0:
            raise ValueError("shift must be positive")
        if self.time_limit <= 0 or self.seeds <= 0:
            raise ValueError("time_limit and seeds must be positive")
        if self.impute_nodes not in ("max_solved", "none"):
            raise ValueError(f"unknown node-imputation policy {self.impute_nodes!r}")


@dataclass
class EvalRecord:
    method: str
    instance: str
    seed: int
    status: str
    time: float
    nodes: int
    objective: float | None = None
    domain: str = ""
    size: str = ""
    error: str | None = None

    @property
    def solved(self) -> bool:
        return self.status in SOLVED

    def to_json(self) -> dict:
        return asdict(self)


def make_record(method, instance, seed, status, time, nodes, objective=None, domain="", size="",
                time_limit=None, error=None) -> EvalRecord:
    """Record with the timeout rule applied: unsolved runs carry ``time_limit``."""
    if status not in SOLVED and time_limit is not None:
        time = float(time_limit)
    return EvalRecord(method, instance, int(seed), status, round(float(time), 3), int(nodes),
                      objective, domain, size, error)


@dataclass
class ReportRow:
    method: str
    domain: str
    size: str
    problems: int          # problems entering the aggregates
    solved: int
    time: float
    nodes: float


@dataclass
class ReportTable:
    rows: list

    def get(self, method, domain, size="") -> ReportRow:
        for r in self.rows:
            if r.method == method and r.domain == domain and r.size == size:
                return r
        raise KeyError((method, domain, size))

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["method", "domain", "size", "problems", "solved", "time", "nodes"])
        for r in self.rows:
            w.writerow([r.method, r.domain, r.size, r.problems, r.solved, f"{r.time:.3f}",
                        f"{r.nodes:.2f}"])
        return buf.getvalue()

    def to_text(self) -> str:
        groups: dict = {}
        for r in self.rows:
            groups.setdefault((r.domain, r.size), []).append(r)
        width = max([len(r.method) for r in self.rows] + [6])
        lines = []
        for (dom, size), rows in groups.items():
            lines.append(f"{dom} {size}".strip())
            lines.append(f"  {'method':<{width}}  {'Solved':>8}  {'Time':>10}  {'Nodes':>10}")
            for r in rows:
                lines.append(f"  {r.method:<{width}}  {r.solved:>4}/{r.problems + 0:<3}  "
                             f"{r.time:>10.3f}  {r.nodes:>10.1f}")
            lines.append("")
        return "\n".join(lines)


def aggregate(records, cfg: MetricConfig | None = None) -> ReportTable:
    """Aggregate raw records into per (method, domain, size) rows.

    A problem is an (instance, seed) pair.  Problems no method solved are left
    out of Time and Nodes.  Unsolved runs count ``time_limit`` seconds and, under
    the default policy, the largest node count of any solved run on the same
    domain and size.
    """
    cfg = cfg or MetricConfig()
    records = list(records)
    methods = list(dict.fromkeys(r.method for r in records))
    groups = list(dict.fromkeys((r.domain, r.size) for r in records))
    solved_by_any = {}
    for r in records:
        key = (r.domain, r.size, r.instance, r.seed)
        solved_by_any[key] = solved_by_any.get(key, False) or r.solved
    max_nodes = {}
    for r in records:
        if r.solved:
            g = (r.domain, r.size)
            max_nodes[g] = max(max_nodes.get(g, 0), r.nodes)
    rows = []
    for dom, size in groups:
        for m in methods:
            recs = [r for r in records if r.method == m and r.domain == dom and r.size == size]
            if not recs:
                continue
            kept = [r for r in recs if solved_by_any[(dom, size, r.instance, r.seed)]]
            times, nodes = [], []
            for r in kept:
                if r.solved:
                    times.append(r.time)
                    nodes.append(r.nodes)
                else:
                    times.append(cfg.time_limit)
                    nodes.append(max(r.nodes, max_nodes.get((dom, size), 0))
                                 if cfg.impute_nodes == "max_solved" else r.nodes)
            rows.append(ReportRow(
                m, dom, size, len(kept), sum(r.solved for r in recs),
                shifted_geomean(times, cfg.shift) if times else math.nan,
                shifted_geomean(nodes, cfg.shift) if nodes else math.nan))
    return ReportTable(rows)


def run_one(method: str, inst, seed: int, solver_cfg: SolverConfig, instance_id: str,
            domain="", size="", rule=None) -> EvalRecord:
    cfg = replace(solver_cfg, random_seed=int(seed))
    try:
        rule = rule if rule is not None else make_rule(method)
        res = solve_mip(inst, cfg, rule)
    except Exception as err:   # recorded, never aborts the sweep
        return make_record(method, instance_id, seed, "error", cfg.time_limit, 0, None, domain, size,
                           cfg.time_limit, f"{type(err).__name__}: {err}")
    return make_record(method, instance_id, seed, res.status, res.wall_time, res.nodes_processed,
                       res.incumbent_objective, domain, size, cfg.time_limit)


def _run_task(task):
    method, inst, seed, solver_cfg, iid, dom, size = task
    return run_one(method, inst, seed, solver_cfg, iid, dom, size)


def benchmark(methods, instances, cfg: MetricConfig | None = None,
              solver_cfg: SolverConfig | None = None, seeds=None, progress=None, workers: int = 1):
    """Solve every (method, instance, seed).

    ``instances`` is a list of ``(instance_id, MipInstance, domain, size)``.
    ``seeds`` defaults to ``1..cfg.seeds``.  With ``workers > 1`` runs go to a
    process pool, one solve per task.  Returns ``(ReportTable, records)``.
    """
    cfg = cfg or MetricConfig()
    solver_cfg = replace(solver_cfg or SolverConfig(), time_limit=cfg.time_limit)
    seeds = list(seeds) if seeds is not None else list(range(1, cfg.seeds + 1))
    rules = {}
    for m in methods:
        try:
            rules[m] = make_rule(m)
        except (OSError, ValueError) as err:
            raise ValueError(f"cannot load method {m!r}: {err}") from err
    tasks = [(m, inst, seed, solver_cfg, iid, dom, size)
             for iid, inst, dom, size in instances for seed in seeds for m in methods]
    records = []
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for rec in pool.map(_run_task, tasks):
                records.append(rec)
                if progress:
                    progress(rec)
    else:
        for m, inst, seed, scfg, iid, dom, size in tasks:
            rec = run_one(m, inst, seed, scfg, iid, dom, size, rules[m])
            records.append(rec)
            if progress:
                progress(rec)
    records.sort(key=lambda r: (methods.index(r.method), r.domain, r.size, r.instance, r.seed))
    return aggregate(records, cfg), records


def write_report(out_dir, table: ReportTable, records) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "records.jsonl", "w") as fh:
        for r in records:
            fh.write(json.dumps(r.to_json(), sort_keys=True) + "\n")
    (out / "report.csv").write_text(table.to_csv())
    (out / "report.txt").write_text(table.to_text())


def load_records(path) -> list:
    with open(path) as fh:
        return [EvalRecord(**json.loads(line)) for line in fh if line.strip()]


def top1_accuracy(model, tuples) -> float:
    """Share of tuples whose highest predicted candidate is the SB choice."""
    if not tuples:
        raise ValueError("no tuples")
    hits = 0
    for t in tuples:
        pred = model.predict(t.X)
        hits += pick_candidate(pred, np.arange(len(pred))) == t.best
    return hits / len(tuples)


def sign_test(a, b) -> tuple[int, int, float]:
    """One-sided sign test that ``a`` tends to be smaller than ``b``.

    Ties are dropped.  Returns ``(wins, losses, p_value)``.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    wins = int(np.sum(a < b))
    losses = int(np.sum(a > b))
    if wins + losses == 0:
        return 0, 0, 1.0
    return wins, losses, float(binomtest(wins, wins + losses, 0.5, alternative="greater").pvalue)
