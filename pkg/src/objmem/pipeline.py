"""End-to-end experiments: world -> online population -> queries -> metrics."""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Optional, Sequence

import yaml

from .memory import ObjectMemory, StorageCosts, memory_to_dict
from .metrics import MetricsReport, QueryEvaluation, evaluate_run
from .population import OmpConfig, PopulationReport, run_stream
from .relevance import RelevanceLabeler, ThresholdAssessor
from .retrieval import FeatureEmbedder, RetrievalResult, localize
from .simworld import (
    NoiseConfig,
    NoisyDiscoverer,
    NoisyTracker,
    OracleDiscoverer,
    OracleTracker,
    Query,
    World,
    WorldConfig,
    generate,
    sample_queries,
)

FRACTIONS = (25, 50, 75, 100)
COMPONENTS = ("oracle", "noisy")


class ConfigError(ValueError):
    pass


def _build(cls, data: dict | None, section: str):
    data = dict(data or {})
    known = {f.name for f in fields(cls)}
    unknown = sorted(set(data) - known)
    if unknown:
        raise ConfigError(f"unknown keys in [{section}]: {', '.join(unknown)}")
    try:
        return cls(**data)
    except (TypeError, ValueError) as e:
        raise ConfigError(f"[{section}] {e}") from e


def _plain(obj) -> dict:
    out = {}
    for f in fields(obj):
        v = getattr(obj, f.name)
        out[f.name] = list(v) if isinstance(v, tuple) else v
    return out


@dataclass
class ExperimentConfig:
    world: WorldConfig = field(default_factory=WorldConfig)
    noise: NoiseConfig = field(default_factory=NoiseConfig.realistic)
    omp: OmpConfig = field(default_factory=OmpConfig)
    storage: StorageCosts = field(default_factory=StorageCosts)
    detector: str = "oracle"
    tracker: str = "oracle"
    embedder: str = "oracle"
    lambda_ret: float = 0.5
    n_queries: int = 200
    # None: each query at a random time after its object's first sighting;
    # an int pins every query to that frame (negative counts from the end)
    query_time: Optional[int] = None
    seed: int = 0

    def __post_init__(self):
        for name in ("detector", "tracker", "embedder"):
            if getattr(self, name) not in COMPONENTS:
                raise ConfigError(f"{name} must be one of {COMPONENTS}, got {getattr(self, name)!r}")
        if not 0.0 <= self.lambda_ret <= 1.0:
            raise ConfigError("lambda_ret must lie in [0, 1]")
        if self.n_queries < 0:
            raise ConfigError("n_queries must be non-negative")

    @classmethod
    def from_dict(cls, data: dict | None) -> "ExperimentConfig":
        data = dict(data or {})
        sections = {"world": WorldConfig, "omp": OmpConfig, "storage": StorageCosts}
        kwargs = {}
        for name, kind in sections.items():
            kwargs[name] = _build(kind, data.pop(name, None), name)
        noise = data.pop("noise", None)
        # the noise section overrides the realistic preset rather than the noise-free defaults
        preset = NoiseConfig.realistic().to_json()
        preset.update(noise or {})
        kwargs["noise"] = _build(NoiseConfig, preset, "noise")
        top = {f.name for f in fields(cls)} - set(sections) - {"noise"}
        unknown = sorted(set(data) - top)
        if unknown:
            raise ConfigError(f"unknown top-level keys: {', '.join(unknown)}")
        kwargs.update(data)
        return cls(**kwargs)

    def to_dict(self) -> dict:
        return {
            "world": self.world.to_json(),
            "noise": self.noise.to_json(),
            "omp": _plain(self.omp),
            "storage": _plain(self.storage),
            "detector": self.detector,
            "tracker": self.tracker,
            "embedder": self.embedder,
            "lambda_ret": self.lambda_ret,
            "n_queries": self.n_queries,
            "query_time": self.query_time,
            "seed": self.seed,
        }

    def with_value(self, dotted: str, value) -> "ExperimentConfig":
        d = self.to_dict()
        node = d
        *path, leaf = dotted.split(".")
        for key in path:
            if not isinstance(node.get(key), dict):
                raise ConfigError(f"no config section {key!r} in {dotted!r}")
            node = node[key]
        if leaf not in node:
            raise ConfigError(f"no config key {dotted!r}")
        node[leaf] = value
        return ExperimentConfig.from_dict(d)


def load_config(path: str | Path) -> ExperimentConfig:
    with open(path) as fh:
        data = yaml.safe_load(fh)
    if data is not None and not isinstance(data, dict):
        raise ConfigError(f"{path}: expected a mapping at the top level")
    return ExperimentConfig.from_dict(data)


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    world: World
    memory: ObjectMemory
    population: PopulationReport
    queries: list[Query]
    retrievals: list[RetrievalResult]
    evaluations: list[QueryEvaluation]
    metrics: MetricsReport
    checkpoints: dict = field(default_factory=dict)

    def results_json(self) -> dict:
        return results_json(self.queries, self.retrievals)


def results_json(queries: Sequence[Query], retrievals: Sequence[RetrievalResult]) -> dict:
    rows = []
    for q, r in zip(queries, retrievals):
        row = {"query_id": q.query_id, "t": q.t}
        row.update(r.to_json())
        rows.append(row)
    return {"results": rows}


def timing_json(retrievals: Sequence[RetrievalResult]) -> dict:
    return {"retrieval_seconds": {str(i): r.elapsed for i, r in enumerate(retrievals)}}


def build_components(cfg: ExperimentConfig, world: World):
    if cfg.detector == "oracle":
        discoverer = OracleDiscoverer(world)
    else:
        discoverer = NoisyDiscoverer(world, cfg.noise, cfg.seed)
    if cfg.tracker == "oracle":
        tracker = OracleTracker(world)
    else:
        tracker = NoisyTracker(world, cfg.noise, cfg.seed)
    return discoverer, tracker


def checkpoint_times(length: int, fractions: Sequence[int] = FRACTIONS) -> dict[int, int]:
    """Last frame index inside each stream fraction (percent)."""
    return {f: max(0, math.ceil(f * length / 100) - 1) for f in fractions}


def _evaluate(queries, retrievals, size) -> tuple[list[QueryEvaluation], MetricsReport]:
    evals = [QueryEvaluation(q.query_id, r.track, r.score, q.ground_truth) for q, r in zip(queries, retrievals)]
    return evals, evaluate_run(evals, size, retrievals)


def run_experiment(cfg: ExperimentConfig, world: World | None = None,
                   fractions: Sequence[int] | None = None, on_checkpoint=None) -> ExperimentResult:
    """Run one configuration. With ``fractions``, queries are additionally posed
    at the end of each stream fraction and scored against the memory as it was then.

    ``on_checkpoint(fraction, memory, queries, retrievals)`` is called at each checkpoint.
    """
    world = world if world is not None else generate(cfg.world, cfg.seed)
    labeler = RelevanceLabeler(cfg.omp.strategy, ThresholdAssessor(cfg.omp.assessor_threshold))
    memory = ObjectMemory(cfg.storage, labeler)
    embed_sigma = cfg.noise.embed_sigma if cfg.embedder == "noisy" else 0.0
    embedder = FeatureEmbedder(world.config.appearance_dim)
    L = len(world)
    at = None if cfg.query_time is None else cfg.query_time % L
    queries = sample_queries(world, cfg.n_queries, cfg.seed, embed_sigma, at=at)
    by_time: dict[int, list[int]] = {}
    for k, q in enumerate(queries):
        by_time.setdefault(q.t, []).append(k)
    answers: list[Optional[RetrievalResult]] = [None] * len(queries)

    cps = checkpoint_times(L, fractions) if fractions else {}
    cp_queries = {f: sample_queries(world, cfg.n_queries, cfg.seed, embed_sigma, at=t) for f, t in cps.items()}
    cp_at = {}
    for f, t in cps.items():
        cp_at.setdefault(t, []).append(f)
    checkpoints = {}

    def on_step(mem, rep):
        for k in by_time.get(rep.t, ()):
            answers[k] = localize(queries[k].feature, mem, embedder, threshold=cfg.lambda_ret)
        for f in cp_at.get(rep.t, ()):
            qs = cp_queries[f]
            rs = [localize(q.feature, mem, embedder, threshold=cfg.lambda_ret) for q in qs]
            _, report = _evaluate(qs, rs, mem.size_bytes())
            checkpoints[f] = {"t": rep.t, "queries": qs, "retrievals": rs, "metrics": report,
                              "n_objects": len(mem)}
            if on_checkpoint is not None:
                on_checkpoint(f, mem, qs, rs)

    discoverer, tracker = build_components(cfg, world)
    omp = cfg.omp
    population = run_stream(memory, world.stream(embed_sigma, cfg.seed), tracker, discoverer, omp, on_step)
    evals, metrics = _evaluate(queries, answers, memory.size_bytes())
    return ExperimentResult(cfg, world, memory, population, queries, answers, evals, metrics, checkpoints)


def metrics_row(res: ExperimentResult) -> dict:
    m = res.metrics
    return {
        "seed": res.config.seed,
        "success": m.success,
        "tap25": m.tap25,
        "stap25": m.stap25,
        "n_queries": m.n_queries,
        "size_bytes": m.mean_size_bytes,
        "peak_size_bytes": res.population.peak_size_bytes,
        "mean_retrieval_ops": m.mean_retrieval_ops,
        "n_objects": len(res.memory),
        "budget_warning": res.population.budget_warning,
    }


def run_sweep(cfg: ExperimentConfig, axis: str, values: Sequence, seeds: Sequence[int]) -> list[dict]:
    """One full pipeline run per (value, seed); rows carry the axis value and the seed."""
    rows = []
    for v in values:
        base = cfg.with_value(axis, v)
        for s in seeds:
            res = run_experiment(replace(base, seed=s))
            row = {"axis": axis, "value": v}
            row.update(metrics_row(res))
            rows.append(row)
    return rows


def aggregate(rows: Sequence[dict], key: str = "value") -> list[dict]:
    """Per-value means of the numeric columns, in first-seen value order."""
    groups: dict = {}
    for r in rows:
        groups.setdefault(json.dumps(r[key]), []).append(r)
    out = []
    for k, rs in groups.items():
        agg = {key: rs[0][key], "n_runs": len(rs)}
        for col in ("success", "tap25", "stap25", "size_bytes", "peak_size_bytes", "mean_retrieval_ops"):
            agg[col] = sum(r[col] for r in rs) / len(rs)
        out.append(agg)
    return out


def digest(obj) -> str:
    """SHA-256 of the canonical JSON form of ``obj``."""
    return hashlib.sha256(json.dumps(obj, sort_keys=True).encode()).hexdigest()


def result_digests(res: ExperimentResult) -> dict[str, str]:
    """Digests of every deterministic output of a run (timing excluded)."""
    return {
        "world": res.world.digest(),
        "memory": digest(memory_to_dict(res.memory)),
        "population": digest(res.population.summary()),
        "steps": digest([s.to_json() for s in res.population.steps]),
        "results": digest(res.results_json()),
        "metrics": digest({k: v for k, v in res.metrics.to_json().items() if k != "mean_retrieval_time"}),
        "config": digest(res.config.to_dict()),
    }
