import math
import random

import pytest

from objmem.geometry import BoundingBox, ResponseTrack
from objmem.metrics import (
    MetricsReport,
    QueryEvaluation,
    average_precision_at,
    evaluate_run,
    stap25,
    success_rate,
    tap25,
)


def tr(start, n, x=0.0):
    return ResponseTrack((start + k, BoundingBox(x, 0, 10, 10)) for k in range(n))


GT = tr(0, 10)


def ev(i, pred, score=1.0, gt=GT):
    return QueryEvaluation(f"q{i}", pred, score, gt)


def test_success_examples():
    assert success_rate([ev(i, GT) for i in range(4)]) == 100.0
    assert success_rate([ev(i, None) for i in range(4)]) == 0.0
    evals = [ev(0, GT), ev(1, tr(0, 10, x=8.0)), ev(2, tr(50, 5)), ev(3, None), ev(4, tr(0, 10, x=9.99))]
    assert success_rate(evals) == 40.0


def test_empty_inputs_rejected():
    with pytest.raises(ValueError):
        success_rate([])
    with pytest.raises(ValueError):
        average_precision_at([])
    with pytest.raises(ValueError):
        QueryEvaluation("q", None, 0.0, None)


def test_ap_examples():
    assert average_precision_at([ev(i, GT, 1 - i / 10) for i in range(5)]) == 100.0
    assert average_precision_at([ev(i, tr(40, 3), 0.9) for i in range(3)]) == 0.0
    evals = [ev(0, GT, 0.9), ev(1, tr(40, 3), 0.8), ev(2, GT, 0.7)]
    assert average_precision_at(evals) == pytest.approx((1 + 2 / 3) / 3 * 100)
    assert round(average_precision_at(evals), 1) == 55.6


def test_absent_predictions_rank_last():
    evals = [ev(0, None, 0.99), ev(1, GT, 0.1)]
    assert average_precision_at(evals) == 50.0


def test_tap_and_stap_use_their_overlaps():
    shifted = tr(0, 10, x=8.0)  # same frames, small spatial overlap
    evals = [ev(0, shifted)]
    assert tap25(evals) == 100.0
    assert stap25(evals) == 0.0


def test_rank_only_dependence_and_order_invariance():
    rng = random.Random(4)
    evals = [ev(i, tr(rng.randint(0, 8), rng.randint(1, 6)), rng.random()) for i in range(8)]
    base = average_precision_at(evals)
    transformed = [QueryEvaluation(e.query_id, e.prediction, math.exp(3 * e.score), e.ground_truth) for e in evals]
    assert average_precision_at(transformed) == base
    shuffled = evals[:]
    rng.shuffle(shuffled)
    assert success_rate(shuffled) == success_rate(evals)


def test_report_round_trip_and_empty_run():
    r = evaluate_run([ev(0, GT), ev(1, None)], [100, 300])
    assert MetricsReport.from_json(r.to_json()) == r
    assert r.mean_size_bytes == 200 and r.success == 50.0
    assert evaluate_run([], 0).success == 0.0
