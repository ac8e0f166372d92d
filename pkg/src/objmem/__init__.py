"""Single-pass object memory for online visual query localization."""

from .geometry import BoundingBox, ResponseTrack, TimeInterval, box_iou, temporal_iou, track_temporal_iou, tube_iou
from .memory import ObjectMemory, StorageCosts, load_memory, save_memory
from .metrics import MetricsReport, QueryEvaluation, average_precision_at, stap25, success_rate, tap25
from .population import OmpConfig, run_stream, step
from .relevance import RelevanceLabeler, Strategy
from .retrieval import FeatureEmbedder, cosine_unit_similarity, localize
from .simworld import NoiseConfig, World, WorldConfig, generate, offline_backward_scan, sample_queries

__version__ = "0.1.0"

__all__ = [
    "BoundingBox", "ResponseTrack", "TimeInterval", "box_iou", "temporal_iou", "track_temporal_iou", "tube_iou",
    "ObjectMemory", "StorageCosts", "load_memory", "save_memory",
    "MetricsReport", "QueryEvaluation", "average_precision_at", "stap25", "success_rate", "tap25",
    "OmpConfig", "run_stream", "step", "RelevanceLabeler", "Strategy",
    "FeatureEmbedder", "cosine_unit_similarity", "localize",
    "NoiseConfig", "World", "WorldConfig", "generate", "offline_backward_scan", "sample_queries",
]
