"""Seeded generators for set covering, combinatorial auction, capacitated
facility location and maximum independent set instances.

All randomness comes from one ``numpy.random.Generator`` per instance, backed
by the PCG64 bit generator (64-bit state transitions, 128-bit state), so a
``(domain, parameters, seed)`` triple yields the same instance on every
platform.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .model import EQ, GE, LE, MipInstance, build_instance, save_instance

DOMAINS = ("sc", "ca", "fl", "is")


@dataclass(frozen=True)
class GeneratorSpec:
    domain: str
    params: dict = field(default_factory=dict)
    seed: int = 0

    def __post_init__(self):
        if self.domain not in DOMAINS:
            raise ValueError(f"unknown domain {self.domain!r}; expected one of {DOMAINS}")
        for k, v in self.params.items():
            if isinstance(v, (int, float)) and not isinstance(v, bool) and v < 0:
                raise ValueError(f"parameter {k} must be non-negative")
        d = self.params.get("density")
        if d is not None and not 0 < d <= 1:
            raise ValueError("density must lie in (0, 1]")


# Desk-scale presets.  "tiny" keeps at most 12 binaries so that instances can
# be checked by exhaustive enumeration.
PRESETS = {
    "sc": {
        "tiny": dict(rows=30, cols=12, density=0.17, max_cost=3),
        "small": dict(rows=250, cols=500, density=0.04),
        "medium": dict(rows=300, cols=600, density=0.04),
        "large": dict(rows=400, cols=800, density=0.04),
    },
    "ca": {
        "tiny": dict(items=10, bids=12),
        "small": dict(items=60, bids=300),
        "medium": dict(items=80, bids=400),
        "large": dict(items=100, bids=500),
    },
    "fl": {
        "tiny": dict(customers=4, facilities=5, ratio=2.0),
        "small": dict(customers=25, facilities=15, ratio=3.0),
        "medium": dict(customers=30, facilities=20, ratio=3.0),
        "large": dict(customers=40, facilities=25, ratio=3.0),
    },
    "is": {
        "tiny": dict(nodes=12, affinity=2),
        "small": dict(nodes=100, affinity=4),
        "medium": dict(nodes=150, affinity=4),
        "large": dict(nodes=200, affinity=4),
    },
}
SIZES = ("tiny", "small", "medium", "large")


def _rng(seed):
    return np.random.Generator(np.random.PCG64(seed))


def gen_setcover(spec: GeneratorSpec) -> MipInstance:
    """``min c x`` s.t. every row is covered by at least one chosen column."""
    p = spec.params
    n_rows, n_cols, density = int(p["rows"]), int(p["cols"]), float(p["density"])
    max_cost = int(p.get("max_cost", 100))
    if density * n_cols < 2:
        raise ValueError("density * cols must be at least 2 so every row can hold two columns")
    rng = _rng(spec.seed)
    support = rng.random((n_rows, n_cols)) < density
    for i in range(n_rows):
        k = int(support[i].sum())
        if k < 2:
            extra = rng.choice(np.flatnonzero(~support[i]), size=2 - k, replace=False)
            support[i, extra] = True
    for j in np.flatnonzero(~support.any(axis=0)):
        support[rng.integers(n_rows), j] = True
    c = rng.integers(1, max_cost + 1, size=n_cols).astype(float)
    rows = [([(int(j), 1.0) for j in np.flatnonzero(support[i])], GE, 1.0) for i in range(n_rows)]
    return build_instance("min", c, rows, np.zeros(n_cols), np.ones(n_cols), np.ones(n_cols, bool),
                          var_names=[f"x{j + 1}" for j in range(n_cols)],
                          row_names=[f"cover{i + 1}" for i in range(n_rows)])


def gen_cauction(spec: GeneratorSpec) -> MipInstance:
    """Winner determination with bundles built by an arbitrary-relationships scheme.

    Simplified relative to the full test-suite generator: no dummy XOR goods,
    so substitute bids of one bidder compete only through shared items.  The
    first ``items`` bids start from item ``b`` so every item row is nonempty.
    """
    p = spec.params
    n_items, n_bids = int(p["items"]), int(p["bids"])
    if n_bids < n_items:
        raise ValueError("bids must be at least items")
    min_value, max_value = float(p.get("min_value", 1)), float(p.get("max_value", 100))
    max_dev = float(p.get("max_deviation", 0.5))
    add_prob = float(p.get("add_prob", 0.65))
    max_sub = int(p.get("max_sub_bids", 5))
    additivity = float(p.get("additivity", 0.2))
    budget_factor = float(p.get("budget_factor", 1.5))
    resale_factor = float(p.get("resale_factor", 0.5))
    rng = _rng(spec.seed)

    values = min_value + (max_value - min_value) * rng.random(n_items)
    compat = np.triu(rng.random((n_items, n_items)), k=1)
    compat = compat + compat.T
    compat = compat / np.maximum(compat.sum(axis=1, keepdims=True), 1e-12)

    def grow(chosen, interests, size=None):
        while True:
            if size is None:
                if not rng.random() < add_prob:
                    break
            elif chosen.sum() >= size:
                break
            if chosen.all():
                break
            w = (~chosen) * compat[chosen].mean(axis=0) * interests
            if w.sum() <= 0:
                w = (~chosen).astype(float)
            chosen[rng.choice(n_items, p=w / w.sum())] = True
        return chosen

    bids: list[tuple[tuple[int, ...], float]] = []
    while len(bids) < n_bids:
        interests = rng.random(n_items)
        private = values + max_value * max_dev * (2 * interests - 1)
        if len(bids) < n_items:
            first = len(bids)
        else:
            first = int(rng.choice(n_items, p=interests / interests.sum()))
        chosen = np.zeros(n_items, bool)
        chosen[first] = True
        bundle = np.flatnonzero(grow(chosen, interests))
        price = private[bundle].sum() + len(bundle) ** (1 + additivity)
        if price <= 0:
            continue
        mine = {tuple(bundle.tolist()): price}
        subs = []
        for item in bundle:
            ch = np.zeros(n_items, bool)
            ch[item] = True
            sb = np.flatnonzero(grow(ch, interests, size=len(bundle)))
            subs.append((tuple(sb.tolist()), private[sb].sum() + len(sb) ** (1 + additivity)))
        budget = budget_factor * price
        min_resale = resale_factor * values[bundle].sum()
        for sb, sp in sorted(subs, key=lambda t: -t[1]):
            if len(mine) >= max_sub + 1 or len(bids) + len(mine) >= n_bids:
                break
            if sp <= 0 or sp > budget or values[list(sb)].sum() < min_resale or sb in mine:
                continue
            mine[sb] = sp
        for sb, sp in mine.items():
            bids.append((sb, round(float(sp), 4)))
    bids = bids[:n_bids]
    per_item: list[list[int]] = [[] for _ in range(n_items)]
    for b, (bundle, _) in enumerate(bids):
        for it in bundle:
            per_item[it].append(b)
    rows = [([(b, 1.0) for b in per_item[i]], LE, 1.0) for i in range(n_items)]
    c = np.array([pr for _, pr in bids])
    return build_instance("max", c, rows, np.zeros(n_bids), np.ones(n_bids), np.ones(n_bids, bool),
                          var_names=[f"b{b + 1}" for b in range(n_bids)],
                          row_names=[f"item{i + 1}" for i in range(n_items)])


def gen_facility(spec: GeneratorSpec) -> MipInstance:
    """Capacitated facility location in the Cornuejols et al. style.

    Variables: ``y_j`` (open facility, binary) then ``x_ij`` (fraction of
    customer ``i`` served by ``j``, continuous in [0, 1]).
    """
    p = spec.params
    n_cust, n_fac, ratio = int(p["customers"]), int(p["facilities"]), float(p.get("ratio", 5.0))
    fixed_scale = float(p.get("fixed_cost_scale", 1.0))
    tighten = bool(p.get("tighten", False))
    rng = _rng(spec.seed)
    cx, cy = rng.random(n_cust), rng.random(n_cust)
    fx, fy = rng.random(n_fac), rng.random(n_fac)
    demand = rng.integers(5, 36, size=n_cust).astype(float)
    cap = rng.integers(10, 161, size=n_fac).astype(float)
    fixed = (rng.integers(100, 111, size=n_fac) * np.sqrt(cap) + rng.integers(0, 91, size=n_fac))
    fixed = np.round(fixed * fixed_scale)
    cap = np.floor(cap * ratio * demand.sum() / cap.sum())
    if cap.sum() < demand.sum():
        raise ValueError("capacity ratio too small to cover total demand")
    dist = np.sqrt((cx[:, None] - fx[None, :]) ** 2 + (cy[:, None] - fy[None, :]) ** 2)
    trans = np.round(dist * 10 * demand[:, None], 4)

    def xid(i, j):
        return n_fac + i * n_fac + j

    n = n_fac + n_cust * n_fac
    c = np.concatenate([fixed, trans.ravel()])
    rows, names = [], []
    for i in range(n_cust):
        rows.append(([(xid(i, j), 1.0) for j in range(n_fac)], EQ, 1.0))
        names.append(f"demand{i + 1}")
    for j in range(n_fac):
        rows.append(([(xid(i, j), demand[i]) for i in range(n_cust)] + [(j, -cap[j])], LE, 0.0))
        names.append(f"capacity{j + 1}")
    if tighten:
        rows.append(([(j, cap[j]) for j in range(n_fac)], GE, demand.sum()))
        names.append("total_capacity")
        for i in range(n_cust):
            for j in range(n_fac):
                rows.append(([(xid(i, j), 1.0), (j, -1.0)], LE, 0.0))
                names.append(f"link{i + 1}_{j + 1}")
    integ = np.zeros(n, bool)
    integ[:n_fac] = True
    vnames = [f"y{j + 1}" for j in range(n_fac)] + [
        f"x{i + 1}_{j + 1}" for i in range(n_cust) for j in range(n_fac)]
    return build_instance("min", c, rows, np.zeros(n), np.ones(n), integ,
                          var_names=vnames, row_names=names)


def barabasi_albert(n_nodes: int, affinity: int, rng) -> list[tuple[int, int]]:
    """Preferential-attachment edge list; ``affinity * (n_nodes - affinity)`` edges."""
    if affinity == 0:
        return []
    if not 1 <= affinity < n_nodes:
        raise ValueError("need 1 <= affinity < nodes")
    edges: list[tuple[int, int]] = []
    degree = np.zeros(n_nodes)
    for new in range(affinity, n_nodes):
        if new == affinity:
            targets = np.arange(affinity)
        else:
            prob = degree[:new] / degree[:new].sum()
            targets = np.sort(rng.choice(new, affinity, replace=False, p=prob))
        for t in targets:
            edges.append((int(t), new))
            degree[t] += 1
            degree[new] += 1
    return edges


def _clique_partition(n_nodes, edges):
    nbrs = [set() for _ in range(n_nodes)]
    for a, b in edges:
        nbrs[a].add(b)
        nbrs[b].add(a)
    deg = np.array([len(s) for s in nbrs])
    left = [int(v) for v in np.argsort(-deg, kind="stable")]
    cliques = []
    while left:
        center, left = left[0], left[1:]
        clique = {center}
        for v in sorted(nbrs[center].intersection(left), key=lambda v: (-deg[v], v)):
            if all(v in nbrs[u] for u in clique):
                clique.add(v)
        cliques.append(sorted(clique))
        left = [v for v in left if v not in clique]
    return cliques


def gen_indset(spec: GeneratorSpec) -> MipInstance:
    """Maximum independent set on a Barabasi-Albert graph, one row per edge.

    With ``clique_cover=True`` the edge rows are replaced by a greedy clique
    partition (cliques of size >= 2), the stronger formulation.
    """
    p = spec.params
    n_nodes, affinity = int(p["nodes"]), int(p.get("affinity", 4))
    if n_nodes <= affinity:
        raise ValueError("nodes must exceed affinity")
    rng = _rng(spec.seed)
    edges = barabasi_albert(n_nodes, affinity, rng)
    if p.get("clique_cover", False):
        cliques = [cl for cl in _clique_partition(n_nodes, edges) if len(cl) >= 2]
        covered = {(min(a, b), max(a, b)) for cl in cliques for a in cl for b in cl if a < b}
        groups = cliques + [[a, b] for a, b in edges if (min(a, b), max(a, b)) not in covered]
    else:
        groups = [[a, b] for a, b in edges]
    rows = [([(v, 1.0) for v in g], LE, 1.0) for g in groups]
    return build_instance("max", np.ones(n_nodes), rows, np.zeros(n_nodes), np.ones(n_nodes),
                          np.ones(n_nodes, bool), var_names=[f"v{i + 1}" for i in range(n_nodes)],
                          row_names=[f"e{k + 1}" for k in range(len(rows))])


GENERATORS = {"sc": gen_setcover, "ca": gen_cauction, "fl": gen_facility, "is": gen_indset}


def generate(domain: str, size: str = "small", seed: int = 0, **overrides) -> MipInstance:
    if size not in PRESETS[domain]:
        raise ValueError(f"unknown size {size!r}; expected one of {SIZES}")
    params = dict(PRESETS[domain][size])
    params.update(overrides)
    inst = GENERATORS[domain](GeneratorSpec(domain, params, seed))
    object.__setattr__(inst, "name", f"{domain}_{size}_{seed}")
    return inst


def instance_seeds(master_seed: int, count: int) -> list[int]:
    """Per-instance seeds derived from a master seed."""
    ss = np.random.SeedSequence(master_seed)
    return [int(s.generate_state(1, np.uint32)[0]) for s in ss.spawn(count)]


def write_suite(out_dir, domain, size, count, seed, **overrides) -> dict:
    """Generate ``count`` instances into ``out_dir`` and write ``manifest.json``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    entries = []
    for k, s in enumerate(instance_seeds(seed, count)):
        inst = generate(domain, size, s, **overrides)
        fname = f"{domain}_{size}_{k:04d}.txt"
        save_instance(inst, out / fname)
        entries.append({"file": fname, "seed": s, "n": inst.n, "m": inst.m})
    params = dict(PRESETS[domain][size])
    params.update(overrides)
    manifest = {"domain": domain, "size": size, "count": count, "master_seed": seed,
                "params": params, "instances": entries}
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return manifest
