"""Verifiable rewards: trajectory (ALAF), affordance (GIoU), format, and their composition."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .frechet import AlafConfig, alaf_distance
from .metrics import Box, giou, normalize_box
from .response_format import (
    AFFORDANCE,
    KINDS,
    TRAJECTORY,
    AffordancePayload,
    ParseError,
    TrajectoryPayload,
    parse_response,
)

NORMALIZATIONS = ("rational", "linear")


@dataclass(frozen=True)
class RewardConfig:
    """Reward shaping parameters.

    ``normalization`` selects how the ALAF distance ``D`` is mapped into
    ``[0, 1]``: ``"rational"`` uses ``D / (D + norm_scale)``, ``"linear"``
    uses ``min(D / norm_scale, 1)``.
    """

    alaf: AlafConfig = field(default_factory=AlafConfig)
    norm_scale: float = 100.0
    w_task: float = 0.9
    w_format: float = 0.1
    parse_fail_task_reward: float = 0.0
    normalization: str = "rational"

    def __post_init__(self):
        if not (math.isfinite(self.norm_scale) and self.norm_scale > 0):
            raise ValueError(f"norm_scale must be > 0, got {self.norm_scale!r}")
        if self.w_task < 0 or self.w_format < 0:
            raise ValueError("reward weights must be nonnegative")
        if abs(self.w_task + self.w_format - 1.0) > 1e-12:
            raise ValueError(f"w_task + w_format must be 1, got {self.w_task + self.w_format!r}")
        if not math.isfinite(self.parse_fail_task_reward):
            raise ValueError("parse_fail_task_reward must be finite")
        if self.normalization not in NORMALIZATIONS:
            raise ValueError(f"normalization must be one of {NORMALIZATIONS}")


def normalize_distance(d: float, cfg: RewardConfig) -> float:
    if cfg.normalization == "linear":
        return min(d / cfg.norm_scale, 1.0)
    return d / (d + cfg.norm_scale)


def traj_reward(pred, gt, cfg: RewardConfig | None = None) -> float:
    """``1 - normalized ALAF distance`` between predicted and ground-truth waypoints."""
    cfg = cfg or RewardConfig()
    return 1.0 - normalize_distance(alaf_distance(pred, gt, cfg.alaf), cfg)


def affordance_reward(pred, gt) -> float:
    """GIoU between predicted and ground-truth boxes, unscaled."""
    return giou(pred, gt)


def best_giou(pred_boxes, gt: Box | None) -> float:
    """Affordance task reward for a (possibly empty) list of predicted boxes.

    With a ground-truth box, the best-matching prediction is scored and an
    empty prediction gets the GIoU infimum -1. With no object (``gt`` None),
    an empty prediction scores 1 and any box scores -1.
    """
    pred_boxes = list(pred_boxes)
    if gt is None:
        return 1.0 if not pred_boxes else -1.0
    if not pred_boxes:
        return -1.0
    return max(affordance_reward(b, gt) for b in pred_boxes)


def coerce_ground_truth(kind: str, gt):
    """Normalize a ground-truth payload to a Box / None (affordance) or waypoint list (trajectory)."""
    if kind == AFFORDANCE:
        if gt is None or isinstance(gt, Box):
            return gt
        if isinstance(gt, AffordancePayload):
            if len(gt.boxes) > 1:
                raise ValueError("ground truth carries at most one box")
            return gt.boxes[0] if gt.boxes else None
        gt = list(gt)
        if not gt:
            return None
        return normalize_box(gt)[0]
    if kind == TRAJECTORY:
        if isinstance(gt, TrajectoryPayload):
            return gt.as_array()
        return gt
    raise ValueError(f"unknown kind {kind!r}")


def composite_reward(raw, ground_truth, kind: str, cfg: RewardConfig | None = None) -> float:
    """Weighted sum ``w_task * R_task + w_format * R_format`` for one response.

    When the response fails to parse, ``R_format`` is 0 and ``R_task`` is
    ``cfg.parse_fail_task_reward``.
    """
    cfg = cfg or RewardConfig()
    if kind not in KINDS:
        raise ValueError(f"unknown kind {kind!r}")
    gt = coerce_ground_truth(kind, ground_truth)
    try:
        parsed = parse_response(raw, kind)
    except ParseError:
        return cfg.w_task * cfg.parse_fail_task_reward
    if kind == AFFORDANCE:
        task = best_giou(parsed.payload.boxes, gt)
    else:
        task = traj_reward(parsed.payload.as_array(), gt, cfg)
    return cfg.w_task * task + cfg.w_format * 1.0
