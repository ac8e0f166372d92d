"""Synthetic egocentric worlds and perception stand-ins.

A world is a set of objects, each with a latent appearance vector and one or
more visibility segments carrying a box per frame. From it we derive the
frame stream fed to population, oracle and noisy detectors/trackers, visual
queries with their ground-truth response tracks, and an offline baseline
that answers queries by scanning the annotations backward in time.
"""

from __future__ import annotations

import hashlib
import json
import math
from collections import Counter
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Iterator, Optional, Sequence

import numpy as np

from .geometry import BoundingBox, ResponseTrack, box_iou
from .memory import TrackContext
from .population import Detection, FrameObservation, TrackUpdate, VisibleInstance
from .retrieval import cosine_unit_similarity

WORLD_VERSION = 1


class WorldConfigError(ValueError):
    pass


def _pair(v) -> tuple:
    return tuple(v)


@dataclass
class WorldConfig:
    n_objects: int = 20
    stream_length: int = 2000
    frame_width: int = 1440
    frame_height: int = 1080
    appearance_dim: int = 16
    segments_per_object: tuple[int, int] = (1, 4)
    segment_length: tuple[int, int] = (15, 120)
    box_size: tuple[int, int] = (40, 160)
    motion_sigma: float = 3.0
    distinctiveness: tuple[float, float] = (0.2, 1.0)
    distinctiveness_jitter: float = 0.25
    max_pair_iou: float = 0.25
    min_gap: int = 2
    seed: int = 0

    def __post_init__(self):
        for name in ("segments_per_object", "segment_length", "box_size", "distinctiveness"):
            setattr(self, name, _pair(getattr(self, name)))
        if self.n_objects < 0 or self.stream_length <= 0 or self.appearance_dim <= 0:
            raise WorldConfigError("object count, stream length and appearance dim must be positive")
        if self.frame_width <= 0 or self.frame_height <= 0:
            raise WorldConfigError("frame size must be positive")
        for name in ("segments_per_object", "segment_length", "box_size", "distinctiveness"):
            lo, hi = getattr(self, name)
            if lo > hi or lo <= 0 and name != "distinctiveness":
                raise WorldConfigError(f"{name} must be an increasing positive range, got {(lo, hi)}")
        if not 0.0 <= self.distinctiveness[0] <= self.distinctiveness[1] <= 1.0:
            raise WorldConfigError("distinctiveness range must lie in [0, 1]")
        if self.min_gap < 1:
            raise WorldConfigError("segments need at least one invisible frame between them")
        if self.box_size[1] > min(self.frame_width, self.frame_height):
            raise WorldConfigError("boxes do not fit in the frame")
        if self.segment_length[0] > self.stream_length:
            raise WorldConfigError("shortest segment is longer than the stream")
        if self.motion_sigma < 0 or self.distinctiveness_jitter < 0:
            raise WorldConfigError("noise scales must be non-negative")

    def to_json(self) -> dict:
        return {f.name: (list(v) if isinstance(v := getattr(self, f.name), tuple) else v) for f in fields(self)}


@dataclass
class Segment:
    start: int
    boxes: list[BoundingBox]
    distinctiveness: list[float]

    @property
    def end(self) -> int:
        return self.start + len(self.boxes) - 1

    def track(self, until: int | None = None) -> ResponseTrack:
        end = self.end if until is None else min(self.end, until)
        return ResponseTrack((self.start + k, self.boxes[k]) for k in range(end - self.start + 1))


@dataclass
class WorldObject:
    gt_id: int
    appearance: np.ndarray
    segments: list[Segment] = field(default_factory=list)

    @property
    def first_t(self) -> int:
        return self.segments[0].start

    def segment_at(self, t: int) -> Optional[Segment]:
        for s in self.segments:
            if s.start <= t <= s.end:
                return s
        return None

    def last_appearance(self, t: int) -> Optional[ResponseTrack]:
        """Latest visibility segment starting at or before ``t``, cut at ``t``."""
        last = None
        for s in self.segments:
            if s.start <= t:
                last = s
        return None if last is None else last.track(until=t)


class FrameStream:
    """Single-use iterator over a world's frames that counts every access."""

    def __init__(self, world: "World", embed_sigma: float = 0.0, seed: int = 0, stop: int | None = None):
        self._world = world
        self._embed_sigma = embed_sigma
        self._seed = seed
        self._stop = world.config.stream_length if stop is None else stop
        self._next = 0
        self.access_counts: Counter = Counter()

    def __iter__(self) -> "FrameStream":
        return self

    def __next__(self) -> FrameObservation:
        t = self._next
        if t >= self._stop:
            raise StopIteration
        self._next += 1
        self.access_counts[t] += 1
        return self._world.observe(t, self._embed_sigma, self._seed)


class World:
    def __init__(self, config: WorldConfig, objects: Sequence[WorldObject]):
        self.config = config
        self.objects = {o.gt_id: o for o in objects}
        self._index: list[list[tuple[int, BoundingBox, float, int]]] = [[] for _ in range(config.stream_length)]
        for o in sorted(objects, key=lambda o: o.gt_id):
            for s in o.segments:
                for k, box in enumerate(s.boxes):
                    self._index[s.start + k].append((o.gt_id, box, s.distinctiveness[k], s.start))

    def __len__(self) -> int:
        return self.config.stream_length

    def instances_at(self, t: int) -> list[tuple[int, BoundingBox, float, int]]:
        """``(gt_id, box, distinctiveness, segment_start)`` for every visible object."""
        return self._index[t]

    def observe(self, t: int, embed_sigma: float = 0.0, seed: int = 0) -> FrameObservation:
        vis = self._index[t]
        if embed_sigma > 0 and vis:
            noise = np.random.default_rng([seed, t, 5]).standard_normal((len(vis), self.config.appearance_dim))
        else:
            noise = None
        insts = []
        for k, (gid, box, d, s0) in enumerate(vis):
            feat = self.objects[gid].appearance
            if noise is not None:
                feat = feat + embed_sigma * (1.0 - d) * noise[k]
            insts.append(VisibleInstance(gid, box, d, feat, s0))
        payload = json.dumps([t, [v[0] for v in vis]]).encode()
        return FrameObservation(t, tuple(insts), payload, background_seed=seed,
                                feature_dim=self.config.appearance_dim)

    def stream(self, embed_sigma: float = 0.0, seed: int = 0, stop: int | None = None) -> FrameStream:
        return FrameStream(self, embed_sigma, seed, stop)

    def audit(self) -> list[str]:
        problems = []
        W, H = self.config.frame_width, self.config.frame_height
        for o in self.objects.values():
            prev_end = -1
            for s in o.segments:
                if s.start <= prev_end + 1 and prev_end >= 0:
                    problems.append(f"object {o.gt_id}: segments overlap or touch at {s.start}")
                if s.start < 0 or s.end >= self.config.stream_length:
                    problems.append(f"object {o.gt_id}: segment [{s.start}, {s.end}] outside the stream")
                prev_end = s.end
                for k, b in enumerate(s.boxes):
                    if b.x < 0 or b.y < 0 or b.x2 > W + 1e-9 or b.y2 > H + 1e-9:
                        problems.append(f"object {o.gt_id}: box out of frame at t={s.start + k}")
                for d in s.distinctiveness:
                    if not 0.0 <= d <= 1.0:
                        problems.append(f"object {o.gt_id}: distinctiveness {d} outside [0, 1]")
        return problems

    def max_pair_iou(self) -> float:
        worst = 0.0
        for vis in self._index:
            for a in range(len(vis)):
                for b in range(a + 1, len(vis)):
                    worst = max(worst, box_iou(vis[a][1], vis[b][1]))
        return worst

    # -- serialization ----------------------------------------------------

    def to_json(self) -> dict:
        return {
            "version": WORLD_VERSION,
            "config": self.config.to_json(),
            "objects": [
                {
                    "gt_id": o.gt_id,
                    "appearance": o.appearance.tolist(),
                    "segments": [
                        {"start": s.start, "boxes": [b.as_list() for b in s.boxes],
                         "distinctiveness": list(s.distinctiveness)}
                        for s in o.segments
                    ],
                }
                for o in sorted(self.objects.values(), key=lambda o: o.gt_id)
            ],
        }

    @classmethod
    def from_json(cls, data: dict) -> "World":
        if data.get("version") != WORLD_VERSION:
            raise ValueError(f"unsupported world version {data.get('version')!r}")
        config = WorldConfig(**data["config"])
        objects = [
            WorldObject(
                o["gt_id"],
                np.asarray(o["appearance"], dtype=float),
                [Segment(s["start"], [BoundingBox.from_list(b) for b in s["boxes"]], list(s["distinctiveness"]))
                 for s in o["segments"]],
            )
            for o in data["objects"]
        ]
        return cls(config, objects)

    def dumps(self) -> str:
        return json.dumps(self.to_json(), sort_keys=True)

    def digest(self) -> str:
        return hashlib.sha256(self.dumps().encode()).hexdigest()

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.dumps())

    @classmethod
    def load(cls, path: str | Path) -> "World":
        return cls.from_json(json.loads(Path(path).read_text()))


# -- generation -------------------------------------------------------------


def _schedule(rng: np.random.Generator, cfg: WorldConfig) -> list[tuple[int, int]]:
    """Non-overlapping ``(start, length)`` visibility windows for one object."""
    L = cfg.stream_length
    k = int(rng.integers(cfg.segments_per_object[0], cfg.segments_per_object[1] + 1))
    lengths = [int(v) for v in rng.integers(cfg.segment_length[0], cfg.segment_length[1] + 1, size=k)]
    lengths = [min(n, L) for n in lengths]
    while len(lengths) > 1 and sum(lengths) + (len(lengths) - 1) * cfg.min_gap > L:
        lengths.pop()
    slack = L - sum(lengths) - (len(lengths) - 1) * cfg.min_gap
    offsets = np.sort(rng.integers(0, slack + 1, size=len(lengths)))
    out = []
    cursor = 0
    for off, n in zip(offsets, lengths):
        out.append((cursor + int(off), n))
        cursor += n + cfg.min_gap
    return out


def _clamp(box: BoundingBox, W: float, H: float) -> BoundingBox:
    x = min(max(box.x, 0.0), W - box.w)
    y = min(max(box.y, 0.0), H - box.h)
    return BoundingBox(x, y, box.w, box.h)


def generate(config: WorldConfig, seed: int | None = None) -> World:
    """Build a world; identical ``(config, seed)`` gives an identical world."""
    cfg = config
    seed = cfg.seed if seed is None else seed
    rng = np.random.default_rng([seed, 0])
    L, W, H = cfg.stream_length, cfg.frame_width, cfg.frame_height
    min_need = cfg.segment_length[0]
    if min_need > L:
        raise WorldConfigError("segments cannot fit in the stream")

    appearances = rng.standard_normal((cfg.n_objects, cfg.appearance_dim))
    sizes = rng.integers(cfg.box_size[0], cfg.box_size[1] + 1, size=(cfg.n_objects, 2))
    d_means = rng.uniform(cfg.distinctiveness[0], cfg.distinctiveness[1], size=cfg.n_objects)
    schedules = [_schedule(rng, cfg) for _ in range(cfg.n_objects)]

    starts: dict[int, list[int]] = {}
    active_until: dict[int, int] = {}
    for gid, sched in enumerate(schedules):
        for s0, n in sched:
            starts.setdefault(s0, []).append(gid)

    segs: dict[int, list[Segment]] = {gid: [] for gid in range(cfg.n_objects)}
    current: dict[int, BoundingBox] = {}
    for t in range(L):
        for gid in [g for g, end in active_until.items() if end < t]:
            del active_until[gid]
            del current[gid]
        placed: dict[int, BoundingBox] = {}
        moving = sorted(current)
        for k, gid in enumerate(moving):
            old = current[gid]
            step = rng.normal(0.0, cfg.motion_sigma, size=2) if cfg.motion_sigma > 0 else (0.0, 0.0)
            cand = _clamp(old.shifted(float(step[0]), float(step[1])), W, H)
            others = list(placed.values()) + [current[g] for g in moving[k + 1:]]
            if any(box_iou(cand, o) > cfg.max_pair_iou for o in others):
                cand = old
            placed[gid] = cand
        for gid in starts.get(t, []):
            w, h = (float(v) for v in sizes[gid])
            for _ in range(200):
                x = float(rng.uniform(0, W - w))
                y = float(rng.uniform(0, H - h))
                cand = BoundingBox(x, y, w, h)
                if all(box_iou(cand, o) <= cfg.max_pair_iou for o in placed.values()):
                    break
            else:
                raise WorldConfigError(f"cannot place object {gid} at frame {t}: scene too crowded")
            placed[gid] = cand
            n = next(n for s0, n in schedules[gid] if s0 == t)
            active_until[gid] = t + n - 1
            segs[gid].append(Segment(t, [], []))
        for gid, box in placed.items():
            seg = segs[gid][-1]
            d = d_means[gid] + cfg.distinctiveness_jitter * rng.standard_normal()
            seg.boxes.append(box)
            seg.distinctiveness.append(float(min(1.0, max(0.0, d))))
        current = placed

    objects = [WorldObject(gid, appearances[gid].copy(), segs[gid]) for gid in range(cfg.n_objects)]
    return World(cfg, objects)


# -- perception noise -------------------------------------------------------


@dataclass
class NoiseConfig:
    """Perception error model. The defaults are noise-free (oracle behavior)."""

    p_det: float = 1.0
    fp_rate: float = 0.0
    det_jitter: float = 0.0
    tp_score: tuple[float, float] = (1.0, 1.0)
    fp_score: tuple[float, float] = (0.02, 0.9)
    p_persist: float = 1.0
    p_reacquire: float = 0.1
    drift: float = 0.0
    p_switch: float = 0.0
    crossing_iou: float = 0.05
    track_score: tuple[float, float] = (1.0, 1.0)
    loss_score: tuple[float, float] = (0.0, 0.55)
    embed_sigma: float = 0.0

    def __post_init__(self):
        for name in ("tp_score", "fp_score", "track_score", "loss_score"):
            lo, hi = getattr(self, name)
            setattr(self, name, (float(lo), float(hi)))
            if not 0.0 <= lo <= hi <= 1.0:
                raise ValueError(f"{name} must be a sub-range of [0, 1]")
        for name in ("p_det", "p_persist", "p_reacquire", "p_switch", "crossing_iou"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ValueError(f"{name} must be a probability")
        for name in ("fp_rate", "det_jitter", "drift", "embed_sigma"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")

    @classmethod
    def realistic(cls, **overrides) -> "NoiseConfig":
        """Moderate errors on every component."""
        base = dict(p_det=0.6, fp_rate=0.03, det_jitter=3.0, tp_score=(0.3, 1.0),
                    p_persist=0.97, p_reacquire=0.08, drift=2.0, p_switch=0.5,
                    track_score=(0.55, 1.0), embed_sigma=0.6)
        base.update(overrides)
        return cls(**base)

    def to_json(self) -> dict:
        return {k: (list(v) if isinstance(v, tuple) else v) for k, v in asdict(self).items()}


def _match_gt(world: World, ctx: TrackContext, min_iou: float = 0.5) -> Optional[int]:
    best, best_iou = None, min_iou
    for gid, box, _, _ in world.instances_at(ctx.discovery_t):
        v = box_iou(box, ctx.discovery_box)
        if v > best_iou:
            best, best_iou = gid, v
    return best


class OracleDiscoverer:
    """Ground-truth box of every object on the first frame of each visibility segment."""

    def __init__(self, world: World | None = None):
        self.world = world

    def discover(self, frame: FrameObservation) -> list[Detection]:
        return [Detection(i.box, 1.0, i.gt_id) for i in frame.instances if i.segment_start == frame.t]


class OracleTracker:
    """Follows each memorized object with its ground-truth box whenever it is visible.

    A memorized object is bound to the ground-truth instance whose box at the
    object's discovery frame overlaps the discovery box by IoU > 0.5.
    """

    def __init__(self, world: World):
        self.world = world
        self.target: dict[int, Optional[int]] = {}

    def _bind(self, context: Sequence[TrackContext]) -> None:
        for ctx in context:
            if ctx.object_id not in self.target:
                self.target[ctx.object_id] = _match_gt(self.world, ctx)

    def track(self, context: Sequence[TrackContext], frame: FrameObservation) -> list[TrackUpdate]:
        self._bind(context)
        out = []
        for ctx in context:
            gid = self.target[ctx.object_id]
            inst = frame.instance(gid) if gid is not None else None
            if inst is not None:
                out.append(TrackUpdate(ctx.object_id, inst.box, 1.0))
        return out


class NoisyDiscoverer:
    """Oracle discovery with misses, box jitter, score spread and false positives.

    A missed instance stays undiscovered for the rest of that segment. Random
    draws do not depend on the outcome, so raising ``p_det`` only adds
    detections for a fixed seed.
    """

    def __init__(self, world: World, noise: NoiseConfig, seed: int = 0):
        self.world = world
        self.noise = noise
        self.seed = seed

    def discover(self, frame: FrameObservation) -> list[Detection]:
        nz = self.noise
        cfg = self.world.config
        rng = np.random.default_rng([self.seed, frame.t, 11])
        out = []
        for inst in frame.instances:
            if inst.segment_start != frame.t:
                continue
            u, jx, jy, us = rng.random(), rng.standard_normal(), rng.standard_normal(), rng.random()
            if u < nz.p_det:
                box = inst.box
                if nz.det_jitter > 0:
                    box = _clamp(box.shifted(nz.det_jitter * jx, nz.det_jitter * jy), cfg.frame_width, cfg.frame_height)
                out.append(Detection(box, nz.tp_score[0] + (nz.tp_score[1] - nz.tp_score[0]) * us, inst.gt_id))
        n_fp = int(rng.poisson(nz.fp_rate)) if nz.fp_rate > 0 else 0
        for _ in range(n_fp):
            w, h = (float(v) for v in rng.integers(cfg.box_size[0], cfg.box_size[1] + 1, size=2))
            box = BoundingBox(float(rng.uniform(0, cfg.frame_width - w)), float(rng.uniform(0, cfg.frame_height - h)), w, h)
            out.append(Detection(box, float(rng.uniform(*nz.fp_score)), None))
        return out


class NoisyTracker(OracleTracker):
    """Oracle tracking degraded by lock loss, drift, low scores and identity swaps.

    Each frame a locked tracker loses its target with probability
    ``1 - p_persist``; a lost tracker reports a displaced box with a score
    drawn from ``loss_score`` and relocks with probability ``p_reacquire``
    while the target is visible. When the ground-truth boxes of two locked
    targets start to overlap by more than ``crossing_iou``, the two trackers
    swap targets with probability ``p_switch``.
    """

    def __init__(self, world: World, noise: NoiseConfig, seed: int = 0):
        super().__init__(world)
        self.noise = noise
        self.seed = seed
        self.lost: dict[int, bool] = {}
        self._crossing: set[tuple[int, int]] = set()

    def _switch(self, context: Sequence[TrackContext], frame: FrameObservation) -> None:
        locked = []
        for ctx in context:
            gid = self.target[ctx.object_id]
            inst = frame.instance(gid) if gid is not None else None
            if inst is not None and not self.lost.get(ctx.object_id, False):
                locked.append((ctx.object_id, inst))
        crossing = set()
        for a in range(len(locked)):
            for b in range(a + 1, len(locked)):
                (ia, inst_a), (ib, inst_b) = locked[a], locked[b]
                if inst_a.gt_id != inst_b.gt_id and box_iou(inst_a.box, inst_b.box) > self.noise.crossing_iou:
                    crossing.add((ia, ib))
        for ia, ib in sorted(crossing - self._crossing):
            if np.random.default_rng([self.seed, frame.t, ia, ib, 17]).random() < self.noise.p_switch:
                self.target[ia], self.target[ib] = self.target[ib], self.target[ia]
        self._crossing = crossing

    def track(self, context: Sequence[TrackContext], frame: FrameObservation) -> list[TrackUpdate]:
        nz = self.noise
        cfg = self.world.config
        self._bind(context)
        self._switch(context, frame)
        out = []
        for ctx in context:
            oid = ctx.object_id
            gid = self.target[oid]
            inst = frame.instance(gid) if gid is not None else None
            if inst is None:
                continue
            rng = np.random.default_rng([self.seed, frame.t, oid, 13])
            u_loss, u_reacq, u_score, u_lscore = rng.random(4)
            dx, dy, lx, ly = rng.standard_normal(4)
            if self.lost.get(oid, False):
                if u_reacq < nz.p_reacquire:
                    self.lost[oid] = False
            elif u_loss >= nz.p_persist:
                self.lost[oid] = True
            if self.lost.get(oid, False):
                reach = 1.5 * max(inst.box.w, inst.box.h)
                box = _clamp(inst.box.shifted(reach * lx, reach * ly), cfg.frame_width, cfg.frame_height)
                score = nz.loss_score[0] + (nz.loss_score[1] - nz.loss_score[0]) * u_lscore
            else:
                box = inst.box
                if nz.drift > 0:
                    box = _clamp(box.shifted(nz.drift * dx, nz.drift * dy), cfg.frame_width, cfg.frame_height)
                score = nz.track_score[0] + (nz.track_score[1] - nz.track_score[0]) * u_score
            out.append(TrackUpdate(oid, box, float(score)))
        return out


def oracle_discoverer(world: World) -> OracleDiscoverer:
    return OracleDiscoverer(world)


def oracle_tracker(world: World) -> OracleTracker:
    return OracleTracker(world)


def noisy_discoverer(world: World, noise: NoiseConfig, seed: int = 0) -> NoisyDiscoverer:
    return NoisyDiscoverer(world, noise, seed)


def noisy_tracker(world: World, noise: NoiseConfig, seed: int = 0) -> NoisyTracker:
    return NoisyTracker(world, noise, seed)


# -- queries ----------------------------------------------------------------


@dataclass(frozen=True)
class Query:
    query_id: str
    t: int
    feature: np.ndarray
    gt_id: int
    ground_truth: ResponseTrack

    def to_json(self) -> dict:
        return {"query_id": self.query_id, "t": self.t, "feature": self.feature.tolist()}

    def gt_json(self) -> dict:
        return {"query_id": self.query_id, "t": self.t, "gt_id": self.gt_id,
                "track": self.ground_truth.to_json()}


def sample_queries(world: World, n: int, seed: int = 0, embed_sigma: float = 0.0,
                   at: int | None = None) -> list[Query]:
    """Draw ``n`` queries of objects already seen at their query time.

    Query times are uniform over each object's post-discovery span, or all
    equal to ``at`` when given. The ground truth is the object's last
    appearance up to the query time.
    """
    if n <= 0:
        return []
    rng = np.random.default_rng([seed, 3])
    if at is None:
        candidates = sorted(g for g, o in world.objects.items() if o.segments)
    else:
        candidates = sorted(g for g, o in world.objects.items() if o.segments and o.first_t <= at)
    if not candidates:
        return []
    out = []
    for k in range(n):
        gid = int(candidates[int(rng.integers(len(candidates)))])
        obj = world.objects[gid]
        t = int(rng.integers(obj.first_t, len(world))) if at is None else at
        noise = np.random.default_rng([seed, k, 7]).standard_normal(world.config.appearance_dim)
        feature = obj.appearance + embed_sigma * noise
        out.append(Query(f"q{k:05d}", t, feature, gid, obj.last_appearance(t)))
    return out


def offline_backward_scan(query, world: World, t: int, threshold: float = 0.5,
                          similarity=cosine_unit_similarity) -> Optional[ResponseTrack]:
    """Answer a query from the full annotated past, scanning from ``t`` backward.

    Every object visible in frames ``t, t-1, ..., 0`` is compared once with
    the query; the best match above ``threshold`` (earliest first sighting
    breaks ties) is then located at its most recent visible frame and its
    contiguous visibility is followed backward.
    """
    q = np.asarray(query, dtype=float)
    sims: dict[int, float] = {}
    first_seen: dict[int, int] = {}
    for tau in range(t, -1, -1):
        for gid, _, _, _ in world.instances_at(tau):
            if gid not in sims:
                sims[gid] = similarity(q, world.objects[gid].appearance)
            first_seen[gid] = tau
    if not sims:
        return None
    best = min(sims, key=lambda g: (-sims[g], first_seen[g], g))
    if not sims[best] > threshold:
        return None
    boxes = []
    tau = t
    while tau >= 0 and not any(g == best for g, *_ in world.instances_at(tau)):
        tau -= 1
    while tau >= 0:
        hit = next((b for g, b, _, _ in world.instances_at(tau) if g == best), None)
        if hit is None:
            break
        boxes.append((tau, hit))
        tau -= 1
    return ResponseTrack(reversed(boxes))


# -- annotation ingestion ---------------------------------------------------


def load_annotations(path: str | Path) -> World:
    """Build a world from a tracking-style annotation file.

    Expected JSON layout::

        {"clip_id": str, "num_frames": int, "frame_width": int, "frame_height": int,
         "objects": [{"object_id": int, "feature": [float, ...],
                      "distinctiveness": float (optional, default 1.0),
                      "frames": [{"t": int, "box": [x, y, w, h]}, ...]}]}

    ``feature`` is the embedding of the object's query crop. Runs of
    consecutive annotated frames become visibility segments.
    """
    data = json.loads(Path(path).read_text())
    objects = []
    dim = None
    for o in data["objects"]:
        feat = np.asarray(o["feature"], dtype=float)
        dim = dim or feat.shape[0]
        if feat.shape[0] != dim:
            raise ValueError(f"object {o['object_id']}: feature dimension {feat.shape[0]} != {dim}")
        d = float(o.get("distinctiveness", 1.0))
        frames = sorted(o["frames"], key=lambda f: f["t"])
        segs: list[Segment] = []
        for f in frames:
            box = BoundingBox.from_list(f["box"])
            if segs and f["t"] == segs[-1].end + 1:
                segs[-1].boxes.append(box)
                segs[-1].distinctiveness.append(d)
            elif segs and f["t"] <= segs[-1].end:
                raise ValueError(f"object {o['object_id']}: duplicate frame {f['t']}")
            else:
                segs.append(Segment(f["t"], [box], [d]))
        objects.append(WorldObject(int(o["object_id"]), feat, segs))
    cfg = WorldConfig(
        n_objects=len(objects),
        stream_length=int(data["num_frames"]),
        frame_width=int(data["frame_width"]),
        frame_height=int(data["frame_height"]),
        appearance_dim=dim or 16,
        segment_length=(1, int(data["num_frames"])),
        box_size=(1, min(int(data["frame_width"]), int(data["frame_height"]))),
        min_gap=1,
    )
    return World(cfg, objects)
