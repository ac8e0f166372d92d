import csv
import hashlib
import json
from pathlib import Path

import pytest
import yaml

from objmem.cli import main
from objmem.memory import load_memory
from objmem.simworld import World

SMALL = {
    "seed": 3,
    "n_queries": 40,
    "world": {"n_objects": 6, "stream_length": 300, "segment_length": [10, 40]},
}


def write_config(tmp_path, **overrides):
    cfg = json.loads(json.dumps(SMALL))
    for key, value in overrides.items():
        node = cfg
        *path, leaf = key.split("__")
        for p in path:
            node = node.setdefault(p, {})
        node[leaf] = value
    path = tmp_path / "cfg.yaml"
    path.write_text(yaml.safe_dump(cfg))
    return path


def sha(path):
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def test_generate_is_idempotent(tmp_path):
    cfg = write_config(tmp_path)
    assert main(["generate", "--config", str(cfg), "--out", str(tmp_path / "a.json")]) == 0
    assert main(["generate", "--config", str(cfg), "--out", str(tmp_path / "b.json")]) == 0
    assert sha(tmp_path / "a.json") == sha(tmp_path / "b.json")
    assert World.load(tmp_path / "a.json").audit() == []


def test_usage_errors(tmp_path, capsys):
    assert main(["generate", "--config", str(tmp_path / "missing.yaml"), "--out", "x.json"]) == 1
    assert main(["generate"]) == 1
    assert main(["frobnicate"]) == 1
    bad = tmp_path / "bad.yaml"
    bad.write_text("world: {n_objects: 3, colour: red}\n")
    assert main(["generate", "--config", str(bad), "--out", str(tmp_path / "w.json")]) == 1
    assert "colour" in capsys.readouterr().err


def test_run_oracle_matches_ground_truth(tmp_path):
    cfg = write_config(tmp_path)
    out = tmp_path / "run"
    assert main(["run", "--config", str(cfg), "--out-dir", str(out)]) == 0
    world = World.load(out / "world.json")
    memory = load_memory(out / "memory.json")
    assert len(memory) == len(world.objects)
    metrics = json.loads((out / "metrics.json").read_text())["metrics"]
    assert metrics["success"] == 100.0
    assert "mean_retrieval_time" not in metrics
    steps = (out / "steps.jsonl").read_text().splitlines()
    assert len(steps) == len(world)


def test_rerun_is_byte_identical(tmp_path):
    cfg = write_config(tmp_path, detector="noisy", tracker="noisy", embedder="noisy")
    for name in ("a", "b"):
        assert main(["run", "--config", str(cfg), "--out-dir", str(tmp_path / name), "--fractions", "50,100"]) == 0
    files = sorted(p.relative_to(tmp_path / "a") for p in (tmp_path / "a").rglob("*") if p.is_file())
    assert files
    for rel in files:
        if rel.name == "timing.json":
            continue
        assert sha(tmp_path / "a" / rel) == sha(tmp_path / "b" / rel), rel


def test_budgeted_run_respects_cap(tmp_path):
    cap = 40_000_000
    cfg = write_config(tmp_path, omp__budget_bytes=cap)
    out = tmp_path / "run"
    assert main(["run", "--config", str(cfg), "--out-dir", str(out), "--binary"]) == 0
    memory = load_memory(out / "memory.json.gz")
    assert memory.size_bytes() <= cap or memory.budget_warning
    for line in (out / "steps.jsonl").read_text().splitlines():
        assert json.loads(line)["size_bytes"] <= cap or memory.budget_warning


def test_query_uses_only_the_memory_dump(tmp_path):
    # queries posed at the final frame can be answered from the final dump
    cfg = write_config(tmp_path, query_time=-1)
    out = tmp_path / "run"
    assert main(["run", "--config", str(cfg), "--out-dir", str(out)]) == 0
    res = tmp_path / "answers.json"
    assert main(["query", "--memory", str(out / "memory.json"), "--queries", str(out / "queries.json"),
                 "--out", str(res)]) == 0
    online = json.loads((out / "results.json").read_text())
    assert json.loads(res.read_text()) == online
    world = World.load(out / "world.json")
    gt = {g["query_id"]: g for g in json.loads((out / "gt.json").read_text())["ground_truth"]}
    memory = load_memory(out / "memory.json")
    for r in online["results"]:
        first = memory.read_object(r["object_id"])[0]
        gid = next(g for g, b, _, _ in world.instances_at(first.t) if b == first.box)
        assert gid == gt[r["query_id"]]["gt_id"]

    empty = tmp_path / "empty.json"
    empty.write_text(json.dumps({"queries": []}))
    assert main(["query", "--memory", str(out / "memory.json"), "--queries", str(empty),
                 "--out", str(tmp_path / "none.json")]) == 0
    assert json.loads((tmp_path / "none.json").read_text()) == {"results": []}


def gt_file(tmp_path, tracks):
    path = tmp_path / "gt.json"
    path.write_text(json.dumps({"ground_truth": [
        {"query_id": f"q{i}", "t": 20, "gt_id": i, "track": t} for i, t in enumerate(tracks)]}))
    return path


def results_file(tmp_path, preds):
    path = tmp_path / "results.json"
    path.write_text(json.dumps({"results": [
        {"query_id": f"q{i}", "t": 20, "object_id": i if p else None, "score": s, "track": p, "similarity_ops": 1}
        for i, (p, s) in enumerate(preds)]}))
    return path


def track(start, n):
    return [[start + k, [0, 0, 10, 10]] for k in range(n)]


def test_evaluate_files(tmp_path, capsys):
    gts = [track(0, 10)] * 3
    gt = gt_file(tmp_path, gts)
    perfect = results_file(tmp_path, [(t, 0.9) for t in gts])
    out = tmp_path / "report.json"
    assert main(["evaluate", "--results", str(perfect), "--gt", str(gt), "--out", str(out)]) == 0
    rep = json.loads(out.read_text())
    assert rep["success"] == rep["tap25"] == rep["stap25"] == 100.0

    empty = tmp_path / "empty.json"
    empty.write_text(json.dumps({"results": []}))
    assert main(["evaluate", "--results", str(empty), "--gt", str(gt), "--out", str(out)]) == 0
    assert json.loads(out.read_text())["success"] == 0.0

    mixed = results_file(tmp_path, [(track(0, 10), 0.9), (track(40, 3), 0.8), (track(0, 10), 0.7)])
    assert main(["evaluate", "--results", str(mixed), "--gt", str(gt), "--out", str(out)]) == 0
    assert json.loads(out.read_text())["tap25"] == pytest.approx((1 + 2 / 3) / 3 * 100)
    assert main(["evaluate", "--results", str(mixed)]) == 1


def test_fraction_sweep_plots(tmp_path):
    cfg = write_config(tmp_path)
    out = tmp_path / "run"
    assert main(["run", "--config", str(cfg), "--out-dir", str(out), "--fractions", "25,50,75,100"]) == 0
    assert sorted(p.name for p in out.glob("p[0-9]*")) == ["p025", "p050", "p075", "p100"]
    assert main(["evaluate", "--run-dir", str(out)]) == 0
    rows = json.loads((out / "fractions.json").read_text())["fractions"]
    assert [r["fraction"] for r in rows] == [25, 50, 75, 100]
    assert all(r["success"] == 100.0 for r in rows)
    assert (out / "fractions.svg").read_text().lstrip().startswith("<?xml")
    assert (out / "fractions.csv").is_file()


def test_budget_sweep(tmp_path):
    cfg = write_config(tmp_path)
    caps = [20_000_000, 40_000_000, 80_000_000, 160_000_000]
    out = tmp_path / "sweep"
    assert main(["sweep", "--config", str(cfg), "--axis", "omp.budget_bytes",
                 "--values", ",".join(map(str, caps)), "--seeds", "3", "--out-dir", str(out)]) == 0
    data = json.loads((out / "sweep.json").read_text())
    assert [r["value"] for r in data["runs"]] == caps
    for r in data["runs"]:
        assert r["peak_size_bytes"] <= r["value"] or r["budget_warning"]
    with open(out / "sweep.csv") as fh:
        assert len(list(csv.DictReader(fh))) == 4
    assert (out / "sweep.svg").is_file()


def test_single_value_sweep_equals_run(tmp_path):
    cfg = write_config(tmp_path, detector="noisy")
    assert main(["sweep", "--config", str(cfg), "--axis", "noise.p_det", "--values", "0.6",
                 "--seeds", "3", "--out-dir", str(tmp_path / "s")]) == 0
    assert main(["run", "--config", str(cfg), "--out-dir", str(tmp_path / "r"), "--set", "noise.p_det=0.6"]) == 0
    row = json.loads((tmp_path / "s" / "sweep.json").read_text())["runs"][0]
    metrics = json.loads((tmp_path / "r" / "metrics.json").read_text())["metrics"]
    for key in ("success", "tap25", "stap25"):
        assert row[key] == metrics[key]


def test_unknown_sweep_axis(tmp_path):
    cfg = write_config(tmp_path)
    assert main(["sweep", "--config", str(cfg), "--axis", "omp.nope", "--values", "1",
                 "--out-dir", str(tmp_path / "s")]) == 1


def test_audit_failure_exit_code(tmp_path, monkeypatch):
    from objmem.memory import ObjectMemory

    monkeypatch.setattr(ObjectMemory, "frugality_violations", lambda self: ["object 0 holds a stale frame"])
    cfg = write_config(tmp_path)
    assert main(["run", "--config", str(cfg), "--out-dir", str(tmp_path / "run")]) == 2
