"""Command line harness: generate | run | query | evaluate | sweep.

Exit codes: 0 success, 1 usage or input error, 2 invariant audit failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

import yaml

from . import pipeline
from .geometry import ResponseTrack
from .memory import load_memory, save_memory
from .metrics import QueryEvaluation, evaluate_run
from .retrieval import FeatureEmbedder, RetrievalResult, localize
from .simworld import World, generate
from .plots import plot_fraction_curves, plot_sweep

log = logging.getLogger("objmem")

EXIT_OK, EXIT_USAGE, EXIT_AUDIT = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: {message}")


def _write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, sort_keys=True, indent=1) + "\n")


def _read_json(path) -> dict:
    try:
        return json.loads(Path(path).read_text())
    except FileNotFoundError:
        raise UsageError(f"no such file: {path}") from None
    except json.JSONDecodeError as e:
        raise UsageError(f"{path}: not valid JSON ({e})") from None


def _config(args) -> pipeline.ExperimentConfig:
    path = Path(args.config)
    if not path.is_file():
        raise UsageError(f"config file not found: {path}")
    cfg = pipeline.load_config(path)
    for item in args.set or ():
        key, sep, raw = item.partition("=")
        if not sep:
            raise UsageError(f"--set expects key=value, got {item!r}")
        cfg = cfg.with_value(key, yaml.safe_load(raw))
    if getattr(args, "seed", None) is not None:
        cfg = cfg.with_value("seed", args.seed)
    return cfg


def _int_list(text: str) -> list[int]:
    out = []
    for part in text.split(","):
        lo, sep, hi = part.partition("-")
        out.extend(range(int(lo), int(hi) + 1) if sep else [int(lo)])
    return out


def _queries_json(queries) -> dict:
    return {"queries": [q.to_json() for q in queries]}


def _gt_json(queries) -> dict:
    return {"ground_truth": [q.gt_json() for q in queries]}


def _audit(world: World, memory) -> list[str]:
    return world.audit() + memory.audit() + memory.frugality_violations()


# -- subcommands --------------------------------------------------------------


def cmd_generate(args) -> int:
    cfg = _config(args)
    world = generate(cfg.world, cfg.seed)
    problems = world.audit()
    world.save(args.out)
    if problems:
        for p in problems:
            log.error("world audit: %s", p)
        return EXIT_AUDIT
    print(f"wrote {args.out} ({len(world.objects)} objects, {len(world)} frames, sha256 {world.digest()[:12]})")
    return EXIT_OK


def _dump_checkpoint(out: Path, suffix: str):
    def save(fraction, memory, queries, retrievals):
        d = out / f"p{fraction:03d}"
        d.mkdir(parents=True, exist_ok=True)
        save_memory(memory, d / f"memory{suffix}")
        _write_json(d / "queries.json", _queries_json(queries))
        _write_json(d / "gt.json", _gt_json(queries))
        _write_json(d / "results.json", pipeline.results_json(queries, retrievals))
        _write_json(d / "timing.json", pipeline.timing_json(retrievals))
    return save


def cmd_run(args) -> int:
    cfg = _config(args)
    world = World.load(args.world) if args.world else None
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    suffix = ".json.gz" if args.binary else ".json"
    fractions = _int_list(args.fractions) if args.fractions else None
    if fractions and any(not 0 < f <= 100 for f in fractions):
        raise UsageError("fractions are percentages in (0, 100]")
    res = pipeline.run_experiment(cfg, world, fractions, _dump_checkpoint(out, suffix) if fractions else None)

    _write_json(out / "config.json", cfg.to_dict())
    res.world.save(out / "world.json")
    save_memory(res.memory, out / f"memory{suffix}")
    with open(out / "steps.jsonl", "w") as fh:
        for s in res.population.steps:
            fh.write(json.dumps(s.to_json(), sort_keys=True) + "\n")
    _write_json(out / "population.json", {"config": cfg.to_dict(), "population": res.population.summary()})
    _write_json(out / "queries.json", _queries_json(res.queries))
    _write_json(out / "gt.json", _gt_json(res.queries))
    _write_json(out / "results.json", res.results_json())
    metrics = res.metrics.to_json()
    timing = pipeline.timing_json(res.retrievals)
    timing["mean_retrieval_time"] = metrics.pop("mean_retrieval_time")
    _write_json(out / "metrics.json", {"config": cfg.to_dict(), "metrics": metrics})
    _write_json(out / "timing.json", timing)
    _write_json(out / "digests.json", {k: v for k, v in pipeline.result_digests(res).items()})

    problems = _audit(res.world, res.memory)
    m = res.metrics
    print(f"objects={len(res.memory)} size={res.memory.size_bytes()} success={m.success:.2f} "
          f"tAP25={m.tap25:.2f} stAP25={m.stap25:.2f}")
    if res.population.budget_warning:
        log.warning("memory budget exceeded by a single remaining object")
    if problems:
        for p in problems:
            log.error("audit: %s", p)
        return EXIT_AUDIT
    return EXIT_OK


def cmd_query(args) -> int:
    memory = load_memory(args.memory)
    problems = memory.audit()
    if problems:
        for p in problems:
            log.error("memory audit: %s", p)
        return EXIT_AUDIT
    data = _read_json(args.queries)
    embedder = FeatureEmbedder()
    rows = []
    for q in data.get("queries", []):
        r = localize(q["feature"], memory, embedder, threshold=args.lambda_ret)
        row = {"query_id": q["query_id"], "t": q.get("t")}
        row.update(r.to_json())
        rows.append(row)
    _write_json(Path(args.out), {"results": rows})
    print(f"answered {len(rows)} queries")
    return EXIT_OK


def _evaluate_files(results_path, gt_path, memory_path=None, timing_path=None):
    results = {r["query_id"]: r for r in _read_json(results_path).get("results", [])}
    gts = _read_json(gt_path).get("ground_truth", [])
    size = 0
    if memory_path:
        size = load_memory(memory_path).size_bytes()
    elapsed = {}
    if timing_path and Path(timing_path).is_file():
        elapsed = _read_json(timing_path).get("retrieval_seconds", {})
    evals, retrievals = [], []
    for k, g in enumerate(gts):
        gt = ResponseTrack.from_json(g["track"])
        r = results.get(g["query_id"])
        if r is None:
            evals.append(QueryEvaluation(g["query_id"], None, 0.0, gt))
            continue
        rr = RetrievalResult.from_json(r, float(elapsed.get(str(k), 0.0)))
        retrievals.append(rr)
        evals.append(QueryEvaluation(g["query_id"], rr.track, rr.score, gt))
    return evaluate_run(evals, size, retrievals)


def cmd_evaluate(args) -> int:
    if args.run_dir:
        run_dir = Path(args.run_dir)
        cps = sorted(d for d in run_dir.glob("p[0-9][0-9][0-9]") if d.is_dir())
        if not cps:
            raise UsageError(f"{run_dir}: no stream-fraction checkpoints (run with --fractions)")
        rows = []
        for d in cps:
            mem = next((p for p in (d / "memory.json", d / "memory.json.gz") if p.is_file()), None)
            rep = _evaluate_files(d / "results.json", d / "gt.json", mem, d / "timing.json")
            row = {"fraction": int(d.name[1:])}
            row.update(rep.to_json())
            row["size_bytes"] = row.pop("mean_size_bytes")
            rows.append(row)
        out = Path(args.out) if args.out else run_dir / "fractions.json"
        _write_json(out, {"fractions": rows})
        with open(out.with_suffix(".csv"), "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=list(rows[0]))
            w.writeheader()
            w.writerows(rows)
        plot_dir = Path(args.plot_dir) if args.plot_dir else run_dir
        plot_dir.mkdir(parents=True, exist_ok=True)
        plot_fraction_curves(rows, plot_dir / "fractions.svg")
        for r in rows:
            print(f"{r['fraction']:>3d}%  success={r['success']:.2f}  size={r['size_bytes']}")
        return EXIT_OK

    if not (args.results and args.gt):
        raise UsageError("evaluate needs --results and --gt, or --run-dir")
    rep = _evaluate_files(args.results, args.gt, args.memory, args.timing)
    text = json.dumps(rep.to_json(), sort_keys=True, indent=1)
    if args.out:
        Path(args.out).write_text(text + "\n")
    print(text)
    return EXIT_OK


def cmd_sweep(args) -> int:
    cfg = _config(args)
    values = [yaml.safe_load(v) for v in args.values.split(",")]
    seeds = _int_list(args.seeds)
    rows = pipeline.run_sweep(cfg, args.axis, values, seeds)
    agg = pipeline.aggregate(rows)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "sweep_runs.csv", "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=list(rows[0]))
        w.writeheader()
        w.writerows(rows)
    with open(out / "sweep.csv", "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=list(agg[0]))
        w.writeheader()
        w.writerows(agg)
    _write_json(out / "sweep.json", {"config": cfg.to_dict(), "axis": args.axis, "seeds": seeds,
                                     "runs": rows, "summary": agg})
    plot_sweep(agg, args.axis, out / "sweep.svg")
    for a in agg:
        print(f"{args.axis}={a['value']}: success={a['success']:.2f} size={a['size_bytes']:.0f}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="objmem", description="Online object memory experiments on synthetic egocentric streams.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True

    def with_config(sp):
        sp.add_argument("--config", required=True, help="YAML experiment config")
        sp.add_argument("--seed", type=int, help="override the config seed")
        sp.add_argument("--set", action="append", metavar="KEY=VALUE",
                        help="override a config key, e.g. omp.strategy=mr2 (repeatable)")

    g = sub.add_parser("generate", help="write a synthetic world")
    with_config(g)
    g.add_argument("--out", required=True)
    g.set_defaults(func=cmd_generate)

    r = sub.add_parser("run", help="populate memory online and answer the sampled queries")
    with_config(r)
    r.add_argument("--out-dir", required=True)
    r.add_argument("--world", help="use this world file instead of generating one")
    r.add_argument("--fractions", help="also checkpoint at these stream percentages, e.g. 25,50,75,100")
    r.add_argument("--binary", action="store_true", help="write gzip-compressed memory dumps")
    r.set_defaults(func=cmd_run)

    q = sub.add_parser("query", help="answer queries from a memory dump alone")
    q.add_argument("--memory", required=True)
    q.add_argument("--queries", required=True)
    q.add_argument("--out", required=True)
    q.add_argument("--lambda-ret", type=float, default=0.5)
    q.set_defaults(func=cmd_query)

    e = sub.add_parser("evaluate", help="score results against ground truth")
    e.add_argument("--results")
    e.add_argument("--gt")
    e.add_argument("--memory", help="memory dump used for the size column")
    e.add_argument("--timing", help="timing.json with per-query retrieval seconds")
    e.add_argument("--run-dir", help="evaluate every stream-fraction checkpoint of a run")
    e.add_argument("--out")
    e.add_argument("--plot-dir")
    e.set_defaults(func=cmd_evaluate)

    s = sub.add_parser("sweep", help="one run per value of a config key, over several seeds")
    with_config(s)
    s.add_argument("--axis", required=True, help="dotted config key, e.g. omp.budget_bytes")
    s.add_argument("--values", required=True, help="comma-separated values")
    s.add_argument("--seeds", default="0", help="e.g. 0-9 or 1,2,3")
    s.add_argument("--out-dir", required=True)
    s.set_defaults(func=cmd_sweep)
    return p


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except UsageError as e:
        print(e, file=sys.stderr)
        return EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (UsageError, pipeline.ConfigError) as e:
        print(f"objmem: {e}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
