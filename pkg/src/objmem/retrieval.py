"""Query retrieval and localization against a memory snapshot.

Only patches of relevant records are compared with the query. Per-object
similarities are averaged, the best object wins if its mean beats the
threshold, and its latest contiguous run of boxes is the answer.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass
from typing import Callable, Optional, Protocol

import numpy as np

from .geometry import ResponseTrack
from .memory import MemorySnapshot, ObjectMemory


class DegenerateInputError(ValueError):
    pass


class Embedder(Protocol):
    def embed(self, content) -> np.ndarray: ...


SimilarityFn = Callable[[np.ndarray, np.ndarray], float]


class FeatureEmbedder:
    """Identity embedder for content that already is a feature vector.

    Accepts raw little-endian float64 bytes (stored patches) or anything
    ``numpy.asarray`` understands (query descriptors).
    """

    def __init__(self, dim: int | None = None):
        self.dim = dim

    def embed(self, content) -> np.ndarray:
        if isinstance(content, (bytes, bytearray, memoryview)):
            v = np.frombuffer(content, dtype="<f8")
        else:
            v = np.asarray(content, dtype=float)
        if v.ndim != 1 or (self.dim is not None and v.shape[0] != self.dim):
            raise ValueError(f"expected a {self.dim}-dimensional feature, got shape {v.shape}")
        if not np.all(np.isfinite(v)):
            raise ValueError("feature contains non-finite values")
        return v


def cosine_unit_similarity(a: np.ndarray, b: np.ndarray) -> float:
    """Cosine similarity mapped affinely from [-1, 1] onto [0, 1]."""
    na = math.sqrt(float(np.dot(a, a)))
    nb = math.sqrt(float(np.dot(b, b)))
    if na == 0.0 or nb == 0.0:
        raise DegenerateInputError("cosine similarity of a zero vector")
    cos = float(np.dot(a, b)) / (na * nb)
    return min(1.0, max(0.0, (1.0 + cos) / 2.0))


@dataclass(frozen=True)
class RetrievalResult:
    object_id: Optional[int]
    score: float
    track: Optional[ResponseTrack]
    similarity_ops: int
    elapsed: float = 0.0

    @property
    def matched(self) -> bool:
        return self.object_id is not None

    def to_json(self) -> dict:
        return {
            "object_id": self.object_id,
            "score": self.score,
            "track": self.track.to_json() if self.track is not None else None,
            "similarity_ops": self.similarity_ops,
        }

    @classmethod
    def from_json(cls, d: dict, elapsed: float = 0.0) -> "RetrievalResult":
        track = ResponseTrack.from_json(d["track"]) if d["track"] is not None else None
        return cls(d["object_id"], d["score"], track, d["similarity_ops"], elapsed)


def object_scores(query, memory: MemorySnapshot | ObjectMemory, embedder: Embedder,
                  similarity: SimilarityFn) -> tuple[dict[int, float], int]:
    """Mean similarity per object over its relevant patches, and the number of comparisons."""
    q = embedder.embed(query)
    scores: dict[int, float] = {}
    ops = 0
    for i in memory.object_ids():
        sims = [similarity(q, embedder.embed(p.content)) for p in memory.relevant_patches(i)]
        ops += len(sims)
        if sims:
            scores[i] = sum(sims) / len(sims)
    return scores, ops


def localize(query, memory: MemorySnapshot | ObjectMemory, embedder: Embedder | None = None,
             similarity: SimilarityFn = cosine_unit_similarity,
             threshold: float = 0.5) -> RetrievalResult:
    """Answer one visual query. Objects with no relevant patch cannot match."""
    embedder = embedder or FeatureEmbedder()
    start = time.perf_counter()
    scores, ops = object_scores(query, memory, embedder, similarity)
    if not scores:
        return RetrievalResult(None, 0.0, None, ops, time.perf_counter() - start)
    # ties go to the lowest id: ids are scanned in ascending order and max keeps the first
    best = max(sorted(scores), key=lambda i: scores[i])
    r = scores[best]
    if r > threshold:
        track = memory.latest_segment(best)
        return RetrievalResult(best, r, track, ops, time.perf_counter() - start)
    return RetrievalResult(None, r, None, ops, time.perf_counter() - start)
