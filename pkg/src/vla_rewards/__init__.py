"""Verifiable rewards, trajectory metrics and GRPO numerics for vision-language-action outputs."""

from .frechet import AlafConfig, alaf_distance, discrete_frechet
from .geometry import arc_length, compute_features, dedup, resample
from .grpo import GroupTooSmall, GrpoConfig, RolloutGroup, group_advantages, grpo_loss, grpo_loss_and_grads
from .harness import EvalConfig, EvalRecord, build_report, load_records, score_record, success_rate
from .metrics import Box, TrajectoryScore, aggregate, box_iou, giou, hausdorff, rmse
from .response_format import ParseError, format_reward, parse_response, serialize_payload
from .rewards import RewardConfig, composite_reward, traj_reward

__version__ = "0.1.0"

__all__ = [
    "AlafConfig",
    "alaf_distance",
    "discrete_frechet",
    "arc_length",
    "compute_features",
    "dedup",
    "resample",
    "GroupTooSmall",
    "GrpoConfig",
    "RolloutGroup",
    "group_advantages",
    "grpo_loss",
    "grpo_loss_and_grads",
    "EvalConfig",
    "EvalRecord",
    "build_report",
    "load_records",
    "score_record",
    "success_rate",
    "Box",
    "TrajectoryScore",
    "aggregate",
    "box_iou",
    "giou",
    "hausdorff",
    "rmse",
    "ParseError",
    "format_reward",
    "parse_response",
    "serialize_payload",
    "RewardConfig",
    "composite_reward",
    "traj_reward",
]
