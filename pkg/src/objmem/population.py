"""Online memory population: one tracking pass and one discovery pass per frame."""

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field
from typing import Callable, Iterable, Optional, Protocol, Sequence

import numpy as np

from .geometry import BoundingBox, box_iou
from .memory import ObjectMemory, OrderingError, Patch, TrackContext
from .relevance import Strategy

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class VisibleInstance:
    """Ground truth for one object in one frame (simulation only)."""

    gt_id: int
    box: BoundingBox
    distinctiveness: float
    feature: np.ndarray
    segment_start: int


@dataclass(frozen=True)
class FrameObservation:
    t: int
    instances: tuple[VisibleInstance, ...] = ()
    payload: bytes = b""
    background_seed: int = 0
    crop_min_iou: float = 0.3
    feature_dim: int = 16

    def instance(self, gt_id: int) -> Optional[VisibleInstance]:
        for inst in self.instances:
            if inst.gt_id == gt_id:
                return inst
        return None

    def crop(self, box: BoundingBox) -> Patch:
        """Appearance seen inside ``box``.

        The best-overlapping visible instance supplies the feature if it
        overlaps by at least ``crop_min_iou``; otherwise the crop is clutter
        with a pseudo-random feature and zero distinctiveness.
        """
        best, best_iou = None, 0.0
        for inst in self.instances:
            v = box_iou(box, inst.box)
            if v > best_iou:
                best, best_iou = inst, v
        if best is not None and best_iou >= self.crop_min_iou:
            return Patch(best.feature, best.distinctiveness)
        key = [self.background_seed, self.t, int(round(box.x)), int(round(box.y))]
        rng = np.random.default_rng([abs(k) for k in key])
        return Patch(rng.standard_normal(self.feature_dim), 0.0)


@dataclass(frozen=True)
class Detection:
    box: BoundingBox
    score: float
    source_gt_id: Optional[int] = None

    def __post_init__(self):
        if not 0.0 <= self.score <= 1.0:
            raise ValueError(f"detection score {self.score} outside [0, 1]")


@dataclass(frozen=True)
class TrackUpdate:
    object_id: int
    box: BoundingBox
    score: float

    def __post_init__(self):
        if not 0.0 <= self.score <= 1.0:
            raise ValueError(f"tracker score {self.score} outside [0, 1]")


class ObjectTracker(Protocol):
    def track(self, context: Sequence[TrackContext], frame: FrameObservation) -> list[TrackUpdate]: ...


class ObjectDiscoverer(Protocol):
    def discover(self, frame: FrameObservation) -> list[Detection]: ...


@dataclass
class OmpConfig:
    lambda_ot: float = 0.5
    lambda_od: float = 0.01
    lambda_iou: float = 0.5
    duplicate_iou: float = 0.5
    strategy: str = Strategy.MR1STAR.value
    assessor_threshold: float = 0.5
    budget_bytes: Optional[int] = None

    def __post_init__(self):
        for name in ("lambda_ot", "lambda_od", "lambda_iou", "duplicate_iou", "assessor_threshold"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {v}")
        Strategy(self.strategy)
        if self.budget_bytes is not None and self.budget_bytes <= 0:
            raise ValueError("budget_bytes must be positive")


@dataclass
class StepReport:
    t: int
    tracker_updates: int = 0
    gated_tracks: int = 0
    suppressed: int = 0
    tracked: int = 0
    detections: int = 0
    gated_detections: int = 0
    discarded: int = 0
    discovered: int = 0
    breaks: int = 0
    frames_deleted: int = 0
    evicted: list[int] = field(default_factory=list)
    size_bytes: int = 0

    def to_json(self) -> dict:
        return asdict(self)


@dataclass
class PopulationReport:
    frames: int = 0
    tracked: int = 0
    suppressed: int = 0
    discovered: int = 0
    discarded: int = 0
    gated_tracks: int = 0
    gated_detections: int = 0
    evicted: int = 0
    final_size_bytes: int = 0
    peak_size_bytes: int = 0
    n_objects: int = 0
    budget_warning: bool = False
    steps: list[StepReport] = field(default_factory=list)

    def add(self, rep: StepReport) -> None:
        self.frames += 1
        self.tracked += rep.tracked
        self.suppressed += rep.suppressed
        self.discovered += rep.discovered
        self.discarded += rep.discarded
        self.gated_tracks += rep.gated_tracks
        self.gated_detections += rep.gated_detections
        self.evicted += len(rep.evicted)
        self.final_size_bytes = rep.size_bytes
        self.peak_size_bytes = max(self.peak_size_bytes, rep.size_bytes)
        self.steps.append(rep)

    def summary(self) -> dict:
        d = asdict(self)
        del d["steps"]
        return d


def suppress_duplicates(updates: Iterable[TrackUpdate], iou: float) -> tuple[list[TrackUpdate], list[TrackUpdate]]:
    """Drop tracker outputs overlapping an older object's output by more than ``iou``."""
    kept: list[TrackUpdate] = []
    dropped: list[TrackUpdate] = []
    for u in sorted(updates, key=lambda u: u.object_id):
        if any(box_iou(u.box, k.box) > iou for k in kept):
            dropped.append(u)
        else:
            kept.append(u)
    return kept, dropped


def step(memory: ObjectMemory, frame: FrameObservation, tracker: ObjectTracker,
         discoverer: ObjectDiscoverer, config: OmpConfig) -> StepReport:
    """Process one frame: track, gate, de-duplicate, write, then discover."""
    t = frame.t
    if t != memory.last_t + 1:
        raise OrderingError(f"expected frame {memory.last_t + 1}, got frame {t}")
    rep = StepReport(t)

    if len(memory):
        updates = tracker.track(memory.tracking_context(), frame)
        rep.tracker_updates = len(updates)
        seen = set()
        for u in updates:
            if u.object_id in seen or u.object_id not in memory:
                raise ValueError(f"tracker update for object {u.object_id} is duplicated or unknown")
            seen.add(u.object_id)
        passed = [u for u in updates if u.score > config.lambda_ot]
        rep.gated_tracks = len(updates) - len(passed)
        kept, dropped = suppress_duplicates(passed, config.duplicate_iou)
        rep.suppressed = len(dropped)
        for u in kept:
            out = memory.write(t, u.box, frame.payload, object_id=u.object_id,
                               patch=frame.crop(u.box), score=u.score)
            rep.tracked += 1
            rep.breaks += out.break_detected
            rep.frames_deleted += out.frames_deleted

    detections = discoverer.discover(frame)
    rep.detections = len(detections)
    passed = [d for d in detections if d.score > config.lambda_od]
    rep.gated_detections = len(detections) - len(passed)
    # highest confidence first so that overlapping detections keep the surer one
    for d in sorted(passed, key=lambda d: -d.score):
        if any(box_iou(d.box, r.box) > config.lambda_iou for _, r in memory.read_time(t)):
            rep.discarded += 1
            continue
        memory.write(t, d.box, frame.payload, patch=frame.crop(d.box), score=d.score)
        rep.discovered += 1

    memory.last_t = max(memory.last_t, t)
    rep.size_bytes = memory.size_bytes()
    return rep


def run_stream(memory: ObjectMemory, stream: Iterable[FrameObservation], tracker: ObjectTracker,
               discoverer: ObjectDiscoverer, config: OmpConfig,
               on_step: Callable[[ObjectMemory, StepReport], None] | None = None) -> PopulationReport:
    """Fold ``step`` over the stream, pruning to the budget after every frame."""
    report = PopulationReport()
    for frame in stream:
        rep = step(memory, frame, tracker, discoverer, config)
        if config.budget_bytes is not None:
            rep.evicted = memory.prune_to_budget(config.budget_bytes)
            rep.size_bytes = memory.size_bytes()
        report.add(rep)
        if on_step is not None:
            on_step(memory, rep)
    report.n_objects = len(memory)
    report.budget_warning = memory.budget_warning
    report.final_size_bytes = memory.size_bytes()
    return report
