"""Command line entry point: generate, collect, train, solve, evaluate, inspect-model.

Settings resolve as defaults < JSON config file (``--config``) < flags.  A
config file holds option names at the top level and/or per-subcommand
sections, e.g. ``{"seed": 3, "evaluate": {"time_limit": 30}}``.

Exit codes: 0 success, 1 configuration error, 2 runtime failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
from pathlib import Path

from .bnb import SolverConfig, solve_mip
from .branching import make_rule
from .collect import CandidateDataset, CollectionConfig, assemble, collect, config_dict, save_tuples
from .evaluate import MetricConfig, benchmark, write_report
from .features import SCHEMA
from .generators import DOMAINS, PRESETS, SIZES, write_suite
from .learn import PathConfig, common_features, load_model, stored_standardized_coefficients, train
from .model import load_instance

log = logging.getLogger("sparsebranch")

ENV_WORKERS = "SPARSEBRANCH_WORKERS"
REQUIRED = object()


class ConfigError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        raise SystemExit(1)


def _csv_list(text):
    return [t for t in str(text).split(",") if t]


def _int_list(text):
    return [int(t) for t in _csv_list(text)]


def _key_value(text):
    if "=" not in text:
        raise argparse.ArgumentTypeError(f"expected key=value, got {text!r}")
    k, v = text.split("=", 1)
    try:
        v = json.loads(v)
    except json.JSONDecodeError:
        pass
    return k, v


# (flag, dest, type, default, help); default REQUIRED marks mandatory settings
_SOLVER_OPTS = [
    ("--time-limit", "time_limit", float, 3600.0, "seconds per solve"),
    ("--node-limit", "node_limit", int, 1_000_000, "nodes per solve"),
    ("--clock", "clock", str, "wall", "wall or work (deterministic work units)"),
    ("--node-selection", "node_selection", str, "best_bound", "best_bound or dfs"),
]

OPTIONS = {
    "generate": [
        ("--domain", "domain", str, REQUIRED, f"one of {', '.join(DOMAINS)}"),
        ("--size", "size", str, "small", f"one of {', '.join(SIZES)}"),
        ("--count", "count", int, 20, "number of instances"),
        ("--seed", "seed", int, 0, "master seed"),
        ("--out", "out", str, REQUIRED, "output directory"),
    ],
    "collect": [
        ("--instances", "instances", _csv_list, REQUIRED, "instance directories (comma separated)"),
        ("--out", "out", str, REQUIRED, "output directory"),
        ("--scheme", "scheme", str, "large", "large or small"),
        ("--sb-probability", "sb_probability", float, 0.05, "chance of running SB at a node"),
        ("--node-cap", "node_cap", int, 1000, "nodes per collection solve"),
        ("--candidate-cap", "candidate_cap", int, None, "candidates per instance"),
        ("--target-candidates", "target_candidates", int, None, "stop after this many candidates"),
        ("--target-tuples", "target_tuples", int, None, "stop after this many SB tuples"),
        ("--instance-budget", "instance_budget", int, 1000, "maximum collection solves"),
        ("--seed", "seed", int, 0, "collection seed"),
        ("--train", "train", int, 0, "rows in the training dataset"),
        ("--valid", "valid", int, 0, "rows in the validation dataset"),
        ("--test", "test", int, 0, "rows in the test dataset"),
        ("--dataset-seeds", "dataset_seeds", _int_list, None, "split seeds (default: --seed)"),
    ] + _SOLVER_OPTS,
    "train": [
        ("--data", "data", str, REQUIRED, "training dataset (jsonl)"),
        ("--valid", "valid", str, REQUIRED, "validation dataset (jsonl)"),
        ("--out", "out", str, REQUIRED, "model file"),
        ("--dfmax", "dfmax", int, None, "cap on nonzero coefficients"),
        ("--n-lambdas", "n_lambdas", int, 100, "lambda grid length"),
        ("--lambda-min-ratio", "lambda_min_ratio", float, 1e-4, "smallest lambda / lambda_max"),
        ("--cd-tolerance", "cd_tolerance", float, 1e-7, "coordinate descent tolerance"),
        ("--max-cd-passes", "max_cd_passes", int, 100_000, "coordinate descent pass limit"),
    ],
    "solve": [
        ("--instance", "instance", str, REQUIRED, "instance file"),
        ("--rule", "rule", str, "pseudocost", "vfs, pseudocost, reliability, random or model:<file>"),
        ("--seed", "seed", int, 0, "run seed"),
        ("--trace", "trace", str, None, "write a node trace (jsonl)"),
    ] + _SOLVER_OPTS,
    "evaluate": [
        ("--methods", "methods", _csv_list, REQUIRED, "comma separated rules"),
        ("--instances", "instances", _csv_list, REQUIRED, "instance directories (comma separated)"),
        ("--seeds", "seeds", int, 5, "seeds per instance"),
        ("--out", "out", str, REQUIRED, "report directory"),
        ("--shift", "shift", float, 1.0, "geometric mean shift"),
        ("--impute-nodes", "impute_nodes", str, "max_solved", "max_solved or none"),
        ("--workers", "workers", int, None, f"worker processes (default ${ENV_WORKERS} or 1)"),
    ] + [o if o[1] != "time_limit" else ("--time-limit", "time_limit", float, 60.0, "seconds per solve")
         for o in _SOLVER_OPTS],
    "inspect-model": [
        ("--top", "top", int, 10, "coefficients to show per model"),
    ],
}


_EXTRA = {"generate": {"params"}, "train": {"quadratic"}}


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="sparsebranch", description="Sparse learned branching for a small MIP solver.")
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", metavar="command", parser_class=_Parser)
    sub.required = True
    for name, opts in OPTIONS.items():
        p = sub.add_parser(name)
        p.add_argument("--config", default=None, help="JSON config file")
        for flag, dest, typ, default, help_ in opts:
            shown = "required" if default is REQUIRED else f"default {default}"
            p.add_argument(flag, dest=dest, type=typ, default=argparse.SUPPRESS, help=f"{help_} ({shown})")
        if name == "generate":
            p.add_argument("--param", dest="params", type=_key_value, action="append",
                           default=argparse.SUPPRESS, help="generator override key=value")
        if name == "train":
            g = p.add_mutually_exclusive_group()
            g.add_argument("--quadratic", dest="quadratic", action="store_true", default=argparse.SUPPRESS)
            g.add_argument("--linear", dest="quadratic", action="store_false", default=argparse.SUPPRESS)
        if name == "inspect-model":
            p.add_argument("models", nargs="+", help="model files")
    return parser


def resolve(command: str, flags: dict, config_path=None) -> dict:
    """Merge defaults, config file and flags for ``command``."""
    opts = OPTIONS[command]
    known = {o[1] for o in opts} | _EXTRA.get(command, set())
    all_known = {o[1] for v in OPTIONS.values() for o in v} | {k for v in _EXTRA.values() for k in v}
    merged = {o[1]: o[3] for o in opts}
    if command == "generate":
        merged["params"] = {}
    if command == "train":
        merged["quadratic"] = True
    if config_path:
        try:
            data = json.loads(Path(config_path).read_text())
        except (OSError, json.JSONDecodeError) as err:
            raise ConfigError(f"cannot read config file {config_path}: {err}") from err
        if not isinstance(data, dict):
            raise ConfigError("config file must hold a JSON object")
        for key, value in data.items():
            if key in OPTIONS:
                continue
            if key not in all_known:
                raise ConfigError(f"unknown config field {key!r}")
            if key in known:
                merged[key] = value
        section = data.get(command, {})
        if not isinstance(section, dict):
            raise ConfigError(f"config section {command!r} must be an object")
        for key, value in section.items():
            if key not in known:
                raise ConfigError(f"unknown config field {command}.{key}")
            merged[key] = value
    for key, value in flags.items():
        if key == "params":
            merged["params"] = {**merged.get("params", {}), **dict(value)}
        else:
            merged[key] = value
    for key, value in merged.items():
        if value is REQUIRED:
            raise ConfigError(f"missing required setting {key!r}")
    return merged


def _solver_config(cfg: dict, seed=0) -> SolverConfig:
    return SolverConfig(time_limit=float(cfg["time_limit"]), node_limit=int(cfg["node_limit"]),
                        clock=cfg["clock"], node_selection=cfg["node_selection"], random_seed=int(seed))


def _as_config(fn, **kw):
    try:
        return fn(**kw)
    except (TypeError, ValueError) as err:
        raise ConfigError(str(err)) from err


def load_suite(dirs) -> list:
    """``(instance_id, MipInstance, domain, size)`` for every instance in ``dirs``."""
    out = []
    for d in dirs:
        d = Path(d)
        if not d.is_dir():
            raise ConfigError(f"instances: {d} is not a directory")
        manifest = d / "manifest.json"
        if manifest.exists():
            meta = json.loads(manifest.read_text())
            files = [(e["file"], meta["domain"], meta["size"]) for e in meta["instances"]]
        else:
            files = []
            for f in sorted(d.glob("*.txt")):
                parts = f.stem.split("_")
                files.append((f.name, parts[0] if len(parts) > 2 else "", parts[1] if len(parts) > 2 else ""))
        for fname, dom, size in files:
            out.append((Path(fname).stem, load_instance(d / fname), dom, size))
    if not out:
        raise ConfigError("instances: no instance files found")
    return out


# ---------------------------------------------------------------------------
# subcommands

def cmd_generate(cfg):
    if cfg["domain"] not in DOMAINS:
        raise ConfigError(f"domain: expected one of {DOMAINS}, got {cfg['domain']!r}")
    if cfg["size"] not in SIZES:
        raise ConfigError(f"size: expected one of {SIZES}, got {cfg['size']!r}")
    unknown = set(cfg["params"]) - set(PRESETS[cfg["domain"]][cfg["size"]])
    if unknown:
        raise ConfigError(f"params: unknown generator parameter(s) {sorted(unknown)}")
    if cfg["count"] <= 0:
        raise ConfigError("count must be positive")
    manifest = write_suite(cfg["out"], cfg["domain"], cfg["size"], cfg["count"], cfg["seed"], **cfg["params"])
    print(f"wrote {manifest['count']} instances to {cfg['out']}")


def cmd_collect(cfg):
    ccfg = _as_config(CollectionConfig, scheme=cfg["scheme"], sb_probability=cfg["sb_probability"],
                      node_cap=cfg["node_cap"], candidate_cap=cfg["candidate_cap"],
                      target_tuples=cfg["target_tuples"], target_candidates=cfg["target_candidates"],
                      instance_budget=cfg["instance_budget"], seed=cfg["seed"])
    scfg = _as_config(_solver_config, cfg=cfg)
    suite = load_suite(cfg["instances"])
    targets = {s: cfg[s] for s in ("train", "valid", "test") if cfg[s]}
    seeds = cfg["dataset_seeds"] or [cfg["seed"]]
    domains = sorted({dom for _, _, dom, _ in suite})
    domain = domains[0] if len(domains) == 1 else ""
    out = Path(cfg["out"])
    out.mkdir(parents=True, exist_ok=True)
    report = collect([s[1] for s in suite], ccfg, scfg, [s[0] for s in suite])
    save_tuples(report.tuples, out / "tuples.jsonl", {"config": cfg_for_artifact(cfg), "domain": domain})
    summary = {"config": cfg_for_artifact(cfg), "collection": config_dict(ccfg), "schema_hash": SCHEMA.hash,
               "tuples": len(report.tuples), "candidates": report.candidates, "solves": report.solves,
               "reached_target": report.reached_target, "instance_draws": report.instance_draws,
               "datasets": {}}
    for seed in (seeds if targets else []):
        sets = assemble(report.tuples, targets, seed, ccfg.scheme, domain)
        for split, ds in sets.items():
            name = f"{split}.jsonl" if len(seeds) == 1 else f"{split}_s{seed}.jsonl"
            ds.save(out / name)
            summary["datasets"][name] = len(ds)
    (out / "collect.json").write_text(json.dumps(summary, indent=1, sort_keys=True) + "\n")
    print(f"collected {len(report.tuples)} tuples ({report.candidates} candidates) "
          f"in {report.solves} solves -> {out}")


def cmd_train(cfg):
    pcfg = _as_config(PathConfig, n_lambdas=cfg["n_lambdas"], lambda_min_ratio=cfg["lambda_min_ratio"],
                      dfmax=cfg["dfmax"], cd_tolerance=cfg["cd_tolerance"], max_cd_passes=cfg["max_cd_passes"])
    try:
        tr = CandidateDataset.load(cfg["data"])
        va = CandidateDataset.load(cfg["valid"])
    except OSError as err:
        raise ConfigError(f"data: {err}") from err
    res = train(tr.X, tr.y, va.X, va.y, quadratic=bool(cfg["quadratic"]), cfg=pcfg,
                domain=tr.domain, seed=tr.seed)
    res.model.meta["config"] = cfg_for_artifact(cfg)
    out = Path(cfg["out"])
    out.parent.mkdir(parents=True, exist_ok=True)
    res.model.save(out)
    with open(out.with_suffix(".path.csv"), "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["lambda", "nnz", "valid_mse", "passes", "converged"])
        for (lam, m), e in zip(res.path, res.valid_mse):
            w.writerow([f"{lam:.9g}", m.nnz, f"{e:.9g}", m.meta["passes"], int(m.meta["converged"])])
    with open(out.with_suffix(".coefs.csv"), "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["term_id", "term", "standardized_coef"])
        for t, name, b in stored_standardized_coefficients(res.model):
            w.writerow([t, name, f"{b:.9g}"])
    print(f"model {out}: nnz={res.model.nnz} of {len(res.model.schema)} terms, "
          f"lambda={res.model.meta['lambda']:.4g}, valid_mse={res.model.meta['valid_mse']:.6g} "
          f"(constant {res.constant_mse:.6g})")


def cmd_solve(cfg):
    scfg = _as_config(_solver_config, cfg=cfg, seed=cfg["seed"])
    try:
        inst = load_instance(cfg["instance"])
        rule = make_rule(cfg["rule"])
    except (OSError, ValueError) as err:
        raise ConfigError(str(err)) from err
    res = solve_mip(inst, scfg, rule, trace_path=cfg["trace"])
    s = res.summary()
    print(f"status: {s['status']}")
    print(f"objective: {s['objective']}")
    print(f"nodes: {s['nodes']}")
    print(f"time: {s['time']:.3f}")
    print(f"lp_iterations: {s['lp_iterations']}")


def cmd_evaluate(cfg):
    mcfg = _as_config(MetricConfig, shift=cfg["shift"], time_limit=cfg["time_limit"], seeds=cfg["seeds"],
                      impute_nodes=cfg["impute_nodes"])
    scfg = _as_config(_solver_config, cfg=cfg)
    workers = cfg["workers"]
    if workers is None:
        try:
            workers = int(os.environ.get(ENV_WORKERS, "1"))
        except ValueError as err:
            raise ConfigError(f"{ENV_WORKERS} must be an integer") from err
    if workers <= 0:
        raise ConfigError("workers must be positive")
    suite = load_suite(cfg["instances"])
    try:
        for m in cfg["methods"]:
            make_rule(m)
    except (OSError, ValueError) as err:
        raise ConfigError(f"methods: {err}") from err

    def progress(rec):
        log.info("%s %s seed=%d %s t=%.3f nodes=%d", rec.method, rec.instance, rec.seed, rec.status,
                 rec.time, rec.nodes)

    table, records = benchmark(cfg["methods"], suite, mcfg, scfg, progress=progress, workers=workers)
    write_report(cfg["out"], table, records)
    (Path(cfg["out"]) / "config.json").write_text(
        json.dumps(cfg_for_artifact(cfg), indent=1, sort_keys=True) + "\n")
    print(table.to_text())


def cmd_inspect(cfg):
    try:
        models = [load_model(p) for p in cfg["models"]]
    except (OSError, ValueError) as err:
        raise ConfigError(f"models: {err}") from err
    for path, m in zip(cfg["models"], models):
        print(f"{path}: {m.nnz} nonzero of {len(m.schema)} terms")
        try:
            coefs = stored_standardized_coefficients(m)
        except ValueError:
            coefs = sorted(((int(t), m.schema.term_name(int(t)), float(b)) for t, b in zip(m.term_ids, m.coefs)),
                           key=lambda e: (-abs(e[2]), e[0]))
            print("  (raw coefficients; no training scales stored)")
        for t, name, b in coefs[:cfg["top"]]:
            print(f"  {b:+.4f}  {name}")
    if len(models) > 1:
        try:
            common = common_features(models)
        except ValueError as err:
            print(f"common features: not comparable ({err})")
            return
        names = [models[0].schema.term_name(t) for t in sorted(common)]
        print(f"common features ({len(names)}): {', '.join(names)}")


COMMANDS = {"generate": cmd_generate, "collect": cmd_collect, "train": cmd_train, "solve": cmd_solve,
            "evaluate": cmd_evaluate, "inspect-model": cmd_inspect}


def cfg_for_artifact(cfg: dict) -> dict:
    return {k: v for k, v in cfg.items() if k not in ("workers",)}


def run_command(argv=None) -> int:
    parser = build_parser()
    try:
        ns = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.DEBUG if ns.verbose else logging.INFO,
                        format="%(asctime)s %(levelname)s %(message)s", stream=sys.stderr)
    flags = {k: v for k, v in vars(ns).items() if k not in ("command", "config", "verbose")}
    try:
        cfg = resolve(ns.command, flags, ns.config)
        log.info("resolved config: %s", json.dumps(cfg, sort_keys=True))
        COMMANDS[ns.command](cfg)
    except ConfigError as err:
        sys.stderr.write(f"config error: {err}\n")
        return 1
    except Exception as err:   # runtime failure
        log.debug("failure", exc_info=True)
        sys.stderr.write(f"error: {type(err).__name__}: {err}\n")
        return 2
    return 0


def main():
    sys.exit(run_command())


if __name__ == "__main__":
    main()
