import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from vla_rewards.metrics import (
    Box,
    EmptyInput,
    TrajectoryScore,
    aggregate,
    box_iou,
    giou,
    hausdorff,
    normalize_box,
    rmse,
)

coord = st.floats(0, 999.99, allow_nan=False)
traj = st.lists(st.tuples(coord, coord), min_size=1, max_size=12)


def hausdorff_oracle(p, q):
    d_pq = max(min(math.dist(a, b) for b in q) for a in p)
    d_qp = max(min(math.dist(b, a) for a in p) for b in q)
    return max(d_pq, d_qp)


def raster_iou_giou(a, b):
    """IoU/GIoU of integer boxes by counting unit cells."""
    def cells(box):
        x1, y1, x2, y2 = box
        return {(x, y) for x in range(x1, x2) for y in range(y1, y2)}

    ca, cb = cells(a), cells(b)
    inter, union = len(ca & cb), len(ca | cb)
    hull = (max(a[2], b[2]) - min(a[0], b[0])) * (max(a[3], b[3]) - min(a[1], b[1]))
    iou = inter / union if union else 0.0
    return iou, iou - (hull - union) / hull


int_box = st.tuples(st.integers(0, 30), st.integers(0, 30), st.integers(1, 15), st.integers(1, 15)).map(
    lambda t: (t[0], t[1], t[0] + t[2], t[1] + t[3]))


# -- Hausdorff -------------------------------------------------------------

def test_hausdorff_examples():
    t = [(0, 0), (10, 20), (30, 5)]
    assert hausdorff(t, t) == 0.0
    assert hausdorff([(0, 0)], [(3, 4)]) == 5.0
    p, q = [(0, 0), (100, 0)], [(0, 0), (100, 0), (50, 40)]
    # waypoint sets: (50, 40) is sqrt(50^2 + 40^2) from both endpoints
    assert hausdorff_oracle(p, q) == pytest.approx(math.sqrt(4100))
    assert hausdorff(p, q) == pytest.approx(64.03124237432849, abs=1e-12)
    # against the segment it sits 40 above
    assert hausdorff(p, q, segments=True) == pytest.approx(40.0)


@given(traj, traj)
def test_hausdorff_matches_oracle_and_is_symmetric(p, q):
    assert hausdorff(p, q) == pytest.approx(hausdorff_oracle(p, q), abs=1e-9)
    assert hausdorff(p, q) == hausdorff(q, p)
    assert hausdorff(p, q, segments=True) <= hausdorff(p, q) + 1e-9


@given(traj, st.floats(-50, 50), st.floats(-50, 50))
def test_translation_gives_offset(points, dx, dy):
    p = np.asarray(points, float)
    q = p + [dx, dy]
    assert hausdorff(p, q) == pytest.approx(math.hypot(dx, dy), abs=1e-9)
    assert rmse(p, q, 17) == pytest.approx(math.hypot(dx, dy), abs=1e-9)


# -- RMSE ------------------------------------------------------------------

def test_rmse_examples():
    t = [(0, 0), (10, 20), (30, 5)]
    assert rmse(t, t) == 0.0
    for k in (2, 5, 50):
        assert rmse([(0, 0), (100, 0)], [(0, 10), (100, 10)], k) == pytest.approx(10.0)
    # k=5: vertical gaps 0, 5, 10, 15, 20 -> sqrt((0+25+100+225+400)/5)
    assert rmse([(0, 0), (100, 0)], [(0, 0), (100, 20)], 5) == pytest.approx(math.sqrt(150), abs=1e-12)


def test_rmse_unequal_lengths():
    # same geometry, different vertex counts
    assert rmse([(0, 0), (100, 0)], [(0, 0), (30, 0), (60, 0), (100, 0)]) == pytest.approx(0.0, abs=1e-12)


@given(traj, traj)
def test_rmse_nonnegative(p, q):
    assert rmse(p, q, 7) >= 0


# -- boxes -----------------------------------------------------------------

def test_iou_examples():
    assert box_iou((0, 0, 10, 10), (0, 0, 10, 10)) == 1.0
    assert box_iou((0, 0, 10, 10), (5, 0, 15, 10)) == pytest.approx(1 / 3)
    assert box_iou((0, 0, 10, 10), (20, 0, 30, 10)) == 0.0


def test_giou_examples():
    assert giou((0, 0, 10, 10), (0, 0, 10, 10)) == 1.0
    assert giou((0, 0, 10, 10), (10, 0, 20, 10)) == 0.0
    assert giou((0, 0, 10, 10), (20, 0, 30, 10)) == pytest.approx(-1 / 3, abs=1e-15)


@given(int_box, int_box)
def test_iou_giou_match_raster_oracle(a, b):
    iou, g = raster_iou_giou(a, b)
    assert box_iou(a, b) == pytest.approx(iou, abs=1e-12)
    assert giou(a, b) == pytest.approx(g, abs=1e-12)


@given(int_box, int_box)
def test_giou_properties(a, b):
    g, i = giou(a, b), box_iou(a, b)
    assert g <= i + 1e-12
    assert -1 < g <= 1
    assert g == giou(b, a) and i == box_iou(b, a)
    hull = (max(a[2], b[2]) - min(a[0], b[0])) * (max(a[3], b[3]) - min(a[1], b[1]))
    inter = max(0, min(a[2], b[2]) - max(a[0], b[0])) * max(0, min(a[3], b[3]) - max(a[1], b[1]))
    union = Box(*a).area + Box(*b).area - inter
    assert (g == i) == (hull == union)


def test_degenerate_boxes():
    point = (5, 5, 5, 5)
    assert box_iou(point, point) == 0.0
    assert box_iou(point, (0, 0, 10, 10)) == 0.0
    assert giou(point, point) == 0.0
    box, flagged = normalize_box(point)
    assert flagged and box.area == 0


def test_normalize_box_repairs():
    box, flagged = normalize_box((10, 20, 0, 5))
    assert box == Box(0, 5, 10, 20) and flagged
    box, flagged = normalize_box((-3, 0, 1200, 10))
    assert flagged and box.x1 == 0 and box.x2 < 1000
    box, flagged = normalize_box((1, 2, 3, 4))
    assert not flagged
    with pytest.raises(ValueError):
        normalize_box((1, 2, 3))
    with pytest.raises(ValueError):
        Box(5, 0, 1, 1)


# -- aggregation -------------------------------------------------------------

def test_trajectory_score_checks_avg():
    s = TrajectoryScore.from_components(3, 6, 9)
    assert s.avg == 6
    with pytest.raises(ValueError):
        TrajectoryScore(3, 6, 9, 7)
    with pytest.raises(ValueError):
        TrajectoryScore.from_components(-1, 0, 0)


@pytest.mark.parametrize(
    "dfd, hd, rm, avg",
    [(106.20, 97.90, 71.12, 91.74), (114.30, 98.43, 68.97, 93.90)],
)
def test_aggregate_reproduces_table_avg(dfd, hd, rm, avg):
    row = aggregate([TrajectoryScore.from_components(dfd, hd, rm)], [0.3651])
    assert row.avg == pytest.approx(avg, abs=0.01)
    assert row.avg == pytest.approx((row.dfd + row.hd + row.rmse) / 3, abs=1e-9)


def test_aggregate_means_and_empty():
    row = aggregate([TrajectoryScore.from_components(0, 0, 0)], [0.0])
    assert (row.iou, row.dfd, row.hd, row.rmse, row.avg) == (0, 0, 0, 0, 0)
    row = aggregate(ious=[0.2, 0.4])
    assert row.iou == pytest.approx(0.3) and row.dfd is None
    with pytest.raises(EmptyInput):
        aggregate(scores=[])
    with pytest.raises(EmptyInput):
        aggregate(ious=[])


@given(st.lists(st.tuples(coord, coord, coord), min_size=1, max_size=30))
def test_aggregate_avg_relation(rows):
    scores = [TrajectoryScore.from_components(*r) for r in rows]
    row = aggregate(scores)
    assert row.avg == pytest.approx((row.dfd + row.hd + row.rmse) / 3, abs=1e-9)
