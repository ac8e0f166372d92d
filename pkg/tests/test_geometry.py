import math

import pytest
from hypothesis import given, strategies as st

from objmem.geometry import (
    BoundingBox,
    ResponseTrack,
    TimeInterval,
    box_iou,
    temporal_iou,
    track_temporal_iou,
    tube_iou,
)


def track(start, n, b=(0, 0, 10, 10)):
    return ResponseTrack((start + k, BoundingBox(*b)) for k in range(n))


def test_box_iou_examples():
    assert box_iou(BoundingBox(0, 0, 10, 10), BoundingBox(0, 0, 10, 10)) == 1.0
    assert box_iou(BoundingBox(0, 0, 5, 5), BoundingBox(10, 10, 5, 5)) == 0.0
    assert box_iou(BoundingBox(0, 0, 10, 10), BoundingBox(5, 0, 10, 10)) == 50 / 150


def test_touching_boxes_do_not_overlap():
    assert box_iou(BoundingBox(0, 0, 10, 10), BoundingBox(10, 0, 10, 10)) == 0.0


def test_temporal_iou_examples():
    assert temporal_iou(TimeInterval(0, 9), TimeInterval(0, 9)) == 1.0
    assert temporal_iou(TimeInterval(0, 4), TimeInterval(5, 9)) == 0.0
    assert temporal_iou(TimeInterval(0, 9), TimeInterval(5, 14)) == 5 / 15
    assert len(TimeInterval(3, 3)) == 1


def test_tube_iou_examples():
    a = track(0, 10)
    assert tube_iou(a, a) == 1.0
    assert tube_iou(track(0, 5), track(5, 5)) == 0.0
    assert tube_iou(a, track(5, 10)) == 500 / 1500


def test_tube_iou_single_frame_reduces_to_box_iou():
    a = ResponseTrack([(4, BoundingBox(0, 0, 10, 10))])
    b = ResponseTrack([(4, BoundingBox(5, 0, 10, 10))])
    assert tube_iou(a, b) == box_iou(a[0][1], b[0][1])


def test_track_temporal_iou_uses_extents():
    assert track_temporal_iou(track(0, 10), track(5, 10)) == 5 / 15


@pytest.mark.parametrize("args", [(0, 0, 0, 1), (0, 0, 1, -1), (math.nan, 0, 1, 1), (0, math.inf, 1, 1)])
def test_invalid_boxes_rejected(args):
    with pytest.raises(ValueError):
        BoundingBox(*args)


def test_invalid_interval_and_track():
    with pytest.raises(ValueError):
        TimeInterval(5, 4)
    with pytest.raises(ValueError):
        TimeInterval(-1, 4)
    with pytest.raises(ValueError):
        ResponseTrack([])
    with pytest.raises(ValueError):
        ResponseTrack([(0, BoundingBox(0, 0, 1, 1)), (2, BoundingBox(0, 0, 1, 1))])


def test_track_json_round_trip():
    t = ResponseTrack([(3, BoundingBox(1.5, 2, 3, 4)), (4, BoundingBox(2, 2, 3, 4))])
    assert ResponseTrack.from_json(t.to_json()) == t
    assert t.start == 3 and t.end == 4 and len(t) == 2


coord = st.floats(-1e4, 1e4, allow_nan=False)
side = st.floats(1e-3, 1e4, allow_nan=False)
boxes = st.builds(BoundingBox, coord, coord, side, side)


@given(boxes, boxes)
def test_box_iou_range_and_symmetry(a, b):
    v = box_iou(a, b)
    assert 0.0 <= v <= 1.0
    assert v == box_iou(b, a)


@st.composite
def tracks(draw):
    start = draw(st.integers(0, 30))
    n = draw(st.integers(1, 8))
    return ResponseTrack((start + k, draw(boxes)) for k in range(n))


@given(tracks(), tracks())
def test_tube_iou_range_symmetry_identity(a, b):
    v = tube_iou(a, b)
    assert 0.0 <= v <= 1.0
    assert v == tube_iou(b, a)
    assert tube_iou(a, a) == 1.0


@given(st.integers(0, 50), st.integers(0, 50), st.integers(0, 50), st.integers(0, 50))
def test_temporal_iou_range_and_symmetry(a0, a1, b0, b1):
    a = TimeInterval(min(a0, a1), max(a0, a1))
    b = TimeInterval(min(b0, b1), max(b0, b1))
    v = temporal_iou(a, b)
    assert 0.0 <= v <= 1.0 and v == temporal_iou(b, a)
