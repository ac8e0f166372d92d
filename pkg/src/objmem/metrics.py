"""Query localization metrics: Success, tAP@0.25 and stAP@0.25, plus size/time."""

from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Callable, Optional, Sequence

from .geometry import ResponseTrack, track_temporal_iou, tube_iou

SUCCESS_IOU = 0.05
AP_IOU = 0.25

Overlap = Callable[[ResponseTrack, ResponseTrack], float]


@dataclass(frozen=True)
class QueryEvaluation:
    query_id: str
    prediction: Optional[ResponseTrack]
    score: float
    ground_truth: ResponseTrack

    def __post_init__(self):
        if self.ground_truth is None or len(self.ground_truth) == 0:
            raise ValueError(f"query {self.query_id}: empty ground truth")


def _require(evals: Sequence[QueryEvaluation]) -> None:
    if not evals:
        raise ValueError("no query evaluations given")


def success_rate(evals: Sequence[QueryEvaluation], min_iou: float = SUCCESS_IOU) -> float:
    _require(evals)
    hits = sum(1 for e in evals if e.prediction is not None and tube_iou(e.prediction, e.ground_truth) >= min_iou)
    return 100.0 * hits / len(evals)


def average_precision_at(evals: Sequence[QueryEvaluation], overlap: Overlap = tube_iou,
                         threshold: float = AP_IOU) -> float:
    """Single-prediction-per-query AP.

    Predictions are ranked by descending score (ties keep input order;
    missing predictions rank last and never count as hits). AP is the sum of
    precision at each hit's rank, divided by the number of queries.
    """
    _require(evals)
    present = [e for e in evals if e.prediction is not None]
    ranked = sorted(present, key=lambda e: -e.score)
    hits = 0
    total = 0.0
    for rank, e in enumerate(ranked, start=1):
        if overlap(e.prediction, e.ground_truth) >= threshold:
            hits += 1
            total += hits / rank
    return 100.0 * total / len(evals)


def tap25(evals: Sequence[QueryEvaluation]) -> float:
    return average_precision_at(evals, track_temporal_iou, AP_IOU)


def stap25(evals: Sequence[QueryEvaluation]) -> float:
    return average_precision_at(evals, tube_iou, AP_IOU)


@dataclass
class MetricsReport:
    tap25: float
    stap25: float
    success: float
    n_queries: int
    mean_size_bytes: float
    mean_retrieval_ops: float
    mean_retrieval_time: float

    def to_json(self) -> dict:
        return asdict(self)

    @classmethod
    def from_json(cls, d: dict) -> "MetricsReport":
        return cls(**d)


def evaluate_run(evals: Sequence[QueryEvaluation], size_bytes: float | Sequence[float],
                 retrievals: Sequence = ()) -> MetricsReport:
    """Assemble a report. ``retrievals`` are objects with ``similarity_ops`` and ``elapsed``."""
    if isinstance(size_bytes, (int, float)):
        mean_size = float(size_bytes)
    else:
        mean_size = sum(size_bytes) / len(size_bytes) if size_bytes else 0.0
    if not evals:
        return MetricsReport(0.0, 0.0, 0.0, 0, mean_size, 0.0, 0.0)
    n = len(retrievals)
    return MetricsReport(
        tap25=tap25(evals),
        stap25=stap25(evals),
        success=success_rate(evals),
        n_queries=len(evals),
        mean_size_bytes=mean_size,
        mean_retrieval_ops=sum(r.similarity_ops for r in retrievals) / n if n else 0.0,
        mean_retrieval_time=sum(r.elapsed for r in retrievals) / n if n else 0.0,
    )
