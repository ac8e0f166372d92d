"""Boxes, frame intervals and response tracks, plus their overlap measures.

Boxes are ``(x, y, w, h)`` in real-valued pixels with ``(x, y)`` the top-left
corner. Frame intervals are inclusive on both ends, so ``[t, t]`` spans one
frame.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Iterator, Sequence


@dataclass(frozen=True)
class BoundingBox:
    x: float
    y: float
    w: float
    h: float

    def __post_init__(self):
        for name in ("x", "y", "w", "h"):
            object.__setattr__(self, name, float(getattr(self, name)))
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise ValueError(f"box origin must be finite, got ({self.x}, {self.y})")
        if not (self.w > 0 and self.h > 0) or not (math.isfinite(self.w) and math.isfinite(self.h)):
            raise ValueError(f"box extent must be positive and finite, got w={self.w} h={self.h}")

    @property
    def area(self) -> float:
        return self.w * self.h

    @property
    def x2(self) -> float:
        return self.x + self.w

    @property
    def y2(self) -> float:
        return self.y + self.h

    def as_list(self) -> list[float]:
        return [self.x, self.y, self.w, self.h]

    @classmethod
    def from_list(cls, v: Sequence[float]) -> "BoundingBox":
        x, y, w, h = v
        return cls(float(x), float(y), float(w), float(h))

    def shifted(self, dx: float, dy: float) -> "BoundingBox":
        return BoundingBox(self.x + dx, self.y + dy, self.w, self.h)


@dataclass(frozen=True)
class TimeInterval:
    start: int
    end: int

    def __post_init__(self):
        if self.start < 0 or self.end < self.start:
            raise ValueError(f"invalid interval [{self.start}, {self.end}]")

    def __len__(self) -> int:
        return self.end - self.start + 1

    def __contains__(self, t: int) -> bool:
        return self.start <= t <= self.end


class ResponseTrack(Sequence):
    """Non-empty run of ``(frame, box)`` pairs on consecutive frames."""

    __slots__ = ("_entries",)

    def __init__(self, entries: Iterable[tuple[int, BoundingBox]]):
        entries = tuple((int(t), b) for t, b in entries)
        if not entries:
            raise ValueError("a response track needs at least one entry")
        for (t0, _), (t1, _) in zip(entries, entries[1:]):
            if t1 != t0 + 1:
                raise ValueError(f"response track is not contiguous at frames {t0} -> {t1}")
        self._entries = entries

    def __getitem__(self, i):
        return self._entries[i]

    def __len__(self) -> int:
        return len(self._entries)

    def __iter__(self) -> Iterator[tuple[int, BoundingBox]]:
        return iter(self._entries)

    def __eq__(self, other) -> bool:
        if not isinstance(other, ResponseTrack):
            return NotImplemented
        return self._entries == other._entries

    def __hash__(self) -> int:
        return hash(self._entries)

    def __repr__(self) -> str:
        return f"ResponseTrack([{self.start}..{self.end}], n={len(self)})"

    @property
    def start(self) -> int:
        return self._entries[0][0]

    @property
    def end(self) -> int:
        return self._entries[-1][0]

    @property
    def interval(self) -> TimeInterval:
        return TimeInterval(self.start, self.end)

    def as_dict(self) -> dict[int, BoundingBox]:
        return dict(self._entries)

    def to_json(self) -> list:
        return [[t, b.as_list()] for t, b in self._entries]

    @classmethod
    def from_json(cls, data) -> "ResponseTrack":
        return cls((t, BoundingBox.from_list(b)) for t, b in data)


def _extent(b: BoundingBox) -> float:
    # area from corner coordinates, so that it agrees bit-for-bit with intersections
    return (b.x2 - b.x) * (b.y2 - b.y)


def intersection_area(a: BoundingBox, b: BoundingBox) -> float:
    iw = min(a.x2, b.x2) - max(a.x, b.x)
    ih = min(a.y2, b.y2) - max(a.y, b.y)
    if iw <= 0 or ih <= 0:
        return 0.0
    return iw * ih


def box_iou(a: BoundingBox, b: BoundingBox) -> float:
    inter = intersection_area(a, b)
    if inter == 0.0:
        return 0.0
    union = _extent(a) + _extent(b) - inter
    return min(1.0, inter / union)


def temporal_iou(a: TimeInterval, b: TimeInterval) -> float:
    overlap = min(a.end, b.end) - max(a.start, b.start) + 1
    if overlap <= 0:
        return 0.0
    union = len(a) + len(b) - overlap
    return overlap / union


def track_temporal_iou(a: ResponseTrack, b: ResponseTrack) -> float:
    return temporal_iou(a.interval, b.interval)


def tube_iou(a: ResponseTrack, b: ResponseTrack) -> float:
    """Volume overlap of two tracks.

    Sum of per-frame intersection areas over the sum of per-frame union
    areas, taken over every frame either track covers. A frame covered by
    only one track adds that box's area to the denominator.
    """
    boxes_a = a.as_dict()
    boxes_b = b.as_dict()
    inter_sum = 0.0
    union_sum = 0.0
    for t in sorted(boxes_a.keys() | boxes_b.keys()):
        ba = boxes_a.get(t)
        bb = boxes_b.get(t)
        if ba is None:
            union_sum += _extent(bb)
        elif bb is None:
            union_sum += _extent(ba)
        else:
            inter = intersection_area(ba, bb)
            inter_sum += inter
            union_sum += _extent(ba) + _extent(bb) - inter
    if inter_sum == 0.0:
        return 0.0
    return min(1.0, inter_sum / union_sum)
