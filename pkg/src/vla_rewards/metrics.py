"""Trajectory and box evaluation metrics and their report aggregation."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .geometry import COORD_MIN, COORD_SUP, as_trajectory, resample

DEFAULT_RESAMPLE_K = 50
AVG_TOL = 1e-9


class EmptyInput(ValueError):
    """Raised when a requested report column has no records."""


# ---------------------------------------------------------------------------
# trajectories
# ---------------------------------------------------------------------------

def _pairwise(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    diff = a[:, None, :] - b[None, :, :]
    return np.sqrt(np.sum(diff * diff, axis=-1))


def _point_segment_dist(pts: np.ndarray, poly: np.ndarray) -> np.ndarray:
    """Distance from each point to the nearest segment of ``poly``, shape (len(pts),)."""
    if len(poly) == 1:
        return _pairwise(pts, poly)[:, 0]
    a = poly[:-1][None, :, :]
    ab = (poly[1:] - poly[:-1])[None, :, :]
    ap = pts[:, None, :] - a
    num = np.sum(ap * ab, axis=-1)
    denom = np.broadcast_to(np.sum(ab * ab, axis=-1), num.shape)
    t = np.divide(num, denom, out=np.zeros_like(num), where=denom > 0)
    t = np.clip(t, 0.0, 1.0)
    d = ap - t[..., None] * ab
    return np.sqrt(np.sum(d * d, axis=-1)).min(axis=1)


def directed_hausdorff(a, b) -> float:
    A, B = as_trajectory(a), as_trajectory(b)
    return float(_pairwise(A, B).min(axis=1).max())


def hausdorff(p, q, segments: bool = False) -> float:
    """Symmetric Hausdorff distance between two waypoint sets.

    By default both trajectories are treated as point sets. With
    ``segments=True`` each waypoint is measured against the other
    trajectory's polyline segments instead of its vertices.
    """
    P, Q = as_trajectory(p), as_trajectory(q)
    if segments:
        return float(max(_point_segment_dist(P, Q).max(), _point_segment_dist(Q, P).max()))
    d = _pairwise(P, Q)
    return float(max(d.min(axis=1).max(), d.min(axis=0).max()))


def rmse(p, q, k: int = DEFAULT_RESAMPLE_K) -> float:
    """Pointwise RMSE after resampling both trajectories to ``k`` points by arc length."""
    a, b = resample(p, k), resample(q, k)
    return float(np.sqrt(np.mean(np.sum((a - b) ** 2, axis=1))))


@dataclass(frozen=True)
class TrajectoryScore:
    """DFD, HD and RMSE for one record; ``avg`` is their arithmetic mean."""

    dfd: float
    hd: float
    rmse: float
    avg: float

    def __post_init__(self):
        for name in ("dfd", "hd", "rmse", "avg"):
            if not getattr(self, name) >= 0:
                raise ValueError(f"{name} must be >= 0, got {getattr(self, name)!r}")
        expected = (self.dfd + self.hd + self.rmse) / 3
        if abs(expected - self.avg) > AVG_TOL * max(1.0, abs(expected)):
            raise ValueError(f"avg {self.avg} != mean of components {expected}")

    @classmethod
    def from_components(cls, dfd: float, hd: float, rmse: float) -> "TrajectoryScore":
        return cls(dfd, hd, rmse, (dfd + hd + rmse) / 3)


# ---------------------------------------------------------------------------
# boxes
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Box:
    x1: float
    y1: float
    x2: float
    y2: float

    def __post_init__(self):
        if not (self.x1 <= self.x2 and self.y1 <= self.y2):
            raise ValueError(f"box corners out of order: {self}")

    @property
    def area(self) -> float:
        return (self.x2 - self.x1) * (self.y2 - self.y1)

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.x1, self.y1, self.x2, self.y2)


def normalize_box(coords) -> tuple[Box, bool]:
    """Build a :class:`Box` from four numbers, repairing what can be repaired.

    Coordinates are clamped into ``[0, 1000)`` and swapped corners reordered.
    The second return value is True when either repair happened or the
    resulting box has zero area.
    """
    vals = [float(v) for v in coords]
    if len(vals) != 4 or not all(math.isfinite(v) for v in vals):
        raise ValueError(f"a box needs four finite numbers, got {coords!r}")
    clamped = [min(max(v, COORD_MIN), COORD_SUP) for v in vals]
    flagged = clamped != vals
    x1, y1, x2, y2 = clamped
    if x1 > x2:
        x1, x2 = x2, x1
        flagged = True
    if y1 > y2:
        y1, y2 = y2, y1
        flagged = True
    box = Box(x1, y1, x2, y2)
    return box, flagged or box.area == 0.0


def _as_box(b) -> Box:
    return b if isinstance(b, Box) else Box(*(float(v) for v in b))


def _inter_union_hull(a: Box, b: Box) -> tuple[float, float, float]:
    iw = max(0.0, min(a.x2, b.x2) - max(a.x1, b.x1))
    ih = max(0.0, min(a.y2, b.y2) - max(a.y1, b.y1))
    inter = iw * ih
    union = a.area + b.area - inter
    hull = (max(a.x2, b.x2) - min(a.x1, b.x1)) * (max(a.y2, b.y2) - min(a.y1, b.y1))
    return inter, union, hull


def box_iou(a, b) -> float:
    """Intersection over union; 0 when the union has zero area."""
    inter, union, _ = _inter_union_hull(_as_box(a), _as_box(b))
    return inter / union if union > 0 else 0.0


def giou(a, b) -> float:
    """Generalized IoU: IoU minus the fraction of the enclosing box not covered by the union.

    For boxes with positive area the value lies in ``(-1, 1]``. Two
    degenerate boxes at distinct points reach -1.
    """
    inter, union, hull = _inter_union_hull(_as_box(a), _as_box(b))
    iou = inter / union if union > 0 else 0.0
    if hull <= 0:
        return iou
    # hull >= union exactly, but the summed areas can round one ulp past it
    return iou - max(hull - union, 0.0) / hull


# ---------------------------------------------------------------------------
# aggregation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ReportRow:
    """Column means; IoU here is on the 0-1 scale. Unrequested columns are None."""

    iou: float | None
    dfd: float | None
    hd: float | None
    rmse: float | None
    avg: float | None


def _mean(values: Sequence[float]) -> float:
    return math.fsum(values) / len(values)


def aggregate(
    scores: Iterable[TrajectoryScore] | None = None,
    ious: Iterable[float] | None = None,
) -> ReportRow:
    """Unweighted per-column means over records.

    Pass ``None`` for a column group that is not requested. A requested but
    empty group raises :class:`EmptyInput`.
    """
    iou = dfd = hd = rm = avg = None
    if ious is not None:
        ious = list(ious)
        if not ious:
            raise EmptyInput("no IoU records")
        iou = _mean(ious)
    if scores is not None:
        scores = list(scores)
        if not scores:
            raise EmptyInput("no trajectory records")
        dfd = _mean([s.dfd for s in scores])
        hd = _mean([s.hd for s in scores])
        rm = _mean([s.rmse for s in scores])
        avg = _mean([s.avg for s in scores])
    return ReportRow(iou, dfd, hd, rm, avg)
