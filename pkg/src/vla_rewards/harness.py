"""Batch evaluation: load prediction records, score them, and build per-kind reports.

Records are line-delimited JSON objects::

    {"id": "a1", "kind": "affordance", "gt": [x1, y1, x2, y2], "pred_raw": "<think>...</output>",
     "object_present": true, "grasp_success": true}
    {"id": "t1", "kind": "trajectory", "gt": [[x, y], ...], "pred_raw": "...", "reached_goal": false}

An affordance record with no object has ``"gt": null`` (or ``[]``).
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass
from typing import Iterable

from .frechet import discrete_frechet
from .metrics import Box, EmptyInput, TrajectoryScore, aggregate, box_iou, giou, hausdorff, rmse
from .response_format import AFFORDANCE, KINDS, TRAJECTORY, ParseError, make_payload, parse_response

REPORT_COLUMNS = ("IoU", "DFD", "HD", "RMSE", "Avg", "SR", "N", "parse_failures")
OVERALL = "overall"

_COMMON_FIELDS = {"id", "kind", "gt", "pred_raw"}
_TRIAL_FIELDS = {AFFORDANCE: {"object_present", "grasp_success"}, TRAJECTORY: {"reached_goal"}}


class SchemaViolation(ValueError):
    """One or more input lines do not match the record schema.

    ``errors`` lists ``(line_number, message)`` for every offending line.
    """

    def __init__(self, errors: list[tuple[int, str]], path: str = "<input>"):
        self.errors = list(errors)
        self.path = path
        lines = "; ".join(f"line {n}: {msg}" for n, msg in self.errors[:5])
        more = f" (+{len(self.errors) - 5} more)" if len(self.errors) > 5 else ""
        super().__init__(f"{path}: {lines}{more}")


class DuplicateId(SchemaViolation):
    pass


class MissingTrialFact(ValueError):
    pass


@dataclass(frozen=True)
class EvalConfig:
    resample_k: int = 50
    tau: float = 0.5
    penalty_distance: float = 300.0
    hausdorff_segments: bool = False

    def __post_init__(self):
        if isinstance(self.resample_k, bool) or not isinstance(self.resample_k, int) or self.resample_k < 2:
            raise ValueError(f"resample_k must be an integer >= 2, got {self.resample_k!r}")
        if not 0 <= self.tau <= 1:
            raise ValueError(f"tau must be in [0, 1], got {self.tau!r}")
        if not (math.isfinite(self.penalty_distance) and self.penalty_distance >= 0):
            raise ValueError(f"penalty_distance must be finite and >= 0, got {self.penalty_distance!r}")


@dataclass(frozen=True)
class EvalRecord:
    id: str
    kind: str
    gt: object  # Box or None (affordance), tuple of (x, y) (trajectory)
    pred_raw: str
    object_present: bool | None = None
    grasp_success: bool | None = None
    reached_goal: bool | None = None
    gt_flagged: bool = False


def _record_from_obj(obj, kind: str | None) -> EvalRecord:
    if not isinstance(obj, dict):
        raise ValueError("record must be an object")
    missing = _COMMON_FIELDS - obj.keys()
    if missing:
        raise ValueError(f"missing field(s) {sorted(missing)}")
    rec_kind = obj["kind"]
    if rec_kind not in KINDS:
        raise ValueError(f"kind must be one of {KINDS}, got {rec_kind!r}")
    if kind is not None and rec_kind != kind:
        raise ValueError(f"kind {rec_kind!r} does not match requested kind {kind!r}")
    extra = obj.keys() - _COMMON_FIELDS - _TRIAL_FIELDS[rec_kind]
    if extra:
        raise ValueError(f"unexpected field(s) for {rec_kind}: {sorted(extra)}")
    if not isinstance(obj["id"], str) or not obj["id"]:
        raise ValueError("id must be a non-empty string")
    if not isinstance(obj["pred_raw"], str):
        raise ValueError("pred_raw must be a string")
    facts = {}
    for name in _TRIAL_FIELDS[rec_kind]:
        v = obj.get(name)
        if v is not None and not isinstance(v, bool):
            raise ValueError(f"{name} must be a boolean")
        facts[name] = v

    gt = obj["gt"]
    if rec_kind == AFFORDANCE:
        if gt is None or gt == []:
            if facts["object_present"] is True:
                raise ValueError("object_present is true but gt has no box")
            box, flagged = None, False
        else:
            if not (isinstance(gt, list) and len(gt) == 4 and all(_is_number(v) for v in gt)):
                raise ValueError("affordance gt must be [x1, y1, x2, y2] or null")
            payload = make_payload(AFFORDANCE, [gt])
            box, flagged = payload.boxes[0], payload.flagged
            if facts["object_present"] is False:
                raise ValueError("object_present is false but gt has a box")
        value = box
    else:
        if not (isinstance(gt, list) and all(isinstance(p, list) and len(p) == 2 and all(_is_number(v) for v in p) for p in gt)):
            raise ValueError("trajectory gt must be a list of [x, y] pairs")
        payload = make_payload(TRAJECTORY, gt)
        value, flagged = payload.waypoints, payload.flagged
    return EvalRecord(obj["id"], rec_kind, value, obj["pred_raw"], gt_flagged=flagged, **facts)


def _is_number(v) -> bool:
    return isinstance(v, (int, float)) and not isinstance(v, bool) and math.isfinite(v)


def parse_records(lines: Iterable[str], kind: str | None = None, path: str = "<input>") -> list[EvalRecord]:
    """Parse record lines, collecting every bad line before raising.

    Blank lines are skipped. Raises :class:`SchemaViolation` listing all
    malformed lines, or :class:`DuplicateId` if the lines are well formed
    but an id repeats.
    """
    records, errors, seen, dups = [], [], {}, []
    for lineno, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            rec = _record_from_obj(json.loads(line), kind)
        except (ValueError, TypeError) as exc:
            errors.append((lineno, str(exc)))
            continue
        if rec.id in seen:
            dups.append((lineno, f"id {rec.id!r} already used on line {seen[rec.id]}"))
            continue
        seen[rec.id] = lineno
        records.append(rec)
    if errors:
        raise SchemaViolation(errors + dups, path)
    if dups:
        raise DuplicateId(dups, path)
    return records


def load_records(path, kind: str | None = None) -> list[EvalRecord]:
    with open(path, encoding="utf-8") as fh:
        return parse_records(fh, kind, str(path))


# ---------------------------------------------------------------------------
# scoring
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RecordScore:
    """Per-record scores. IoU is on the 0-1 scale; unused metric fields are None."""

    id: str
    kind: str
    parse_failure: bool
    flagged: bool
    iou: float | None = None
    giou: float | None = None
    n_pred_boxes: int | None = None
    dfd: float | None = None
    hd: float | None = None
    rmse: float | None = None
    avg: float | None = None
    object_present: bool | None = None
    grasp_success: bool | None = None
    reached_goal: bool | None = None

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True, allow_nan=False)

    @classmethod
    def from_obj(cls, obj: dict) -> "RecordScore":
        return cls(**obj)

    @property
    def trajectory_score(self) -> TrajectoryScore:
        return TrajectoryScore(self.dfd, self.hd, self.rmse, self.avg)


def _best_box(pred: list[Box], gt: Box | None) -> tuple[float, float]:
    if gt is None:
        return (1.0, 1.0) if not pred else (0.0, -1.0)
    if not pred:
        return 0.0, -1.0
    return max((box_iou(b, gt), giou(b, gt)) for b in pred)


def score_record(rec: EvalRecord, cfg: EvalConfig | None = None) -> RecordScore:
    """Score one record. Never raises for a valid record; parse failures get penalty scores."""
    cfg = cfg or EvalConfig()
    try:
        payload = parse_response(rec.pred_raw, rec.kind).payload
    except ParseError:
        payload = None
    common = dict(id=rec.id, kind=rec.kind, parse_failure=payload is None)

    if rec.kind == AFFORDANCE:
        facts = dict(object_present=rec.object_present, grasp_success=rec.grasp_success)
        if payload is None:
            return RecordScore(**common, flagged=rec.gt_flagged, iou=0.0, giou=-1.0, n_pred_boxes=0, **facts)
        iou, g = _best_box(list(payload.boxes), rec.gt)
        return RecordScore(
            **common, flagged=rec.gt_flagged or payload.flagged,
            iou=iou, giou=g, n_pred_boxes=len(payload.boxes), **facts,
        )

    if payload is None:
        d = float(cfg.penalty_distance)
        s = TrajectoryScore.from_components(d, d, d)
        flagged = rec.gt_flagged
    else:
        pred = payload.as_array()
        s = TrajectoryScore.from_components(
            discrete_frechet(pred, rec.gt),
            hausdorff(pred, rec.gt, segments=cfg.hausdorff_segments),
            rmse(pred, rec.gt, cfg.resample_k),
        )
        flagged = rec.gt_flagged or payload.flagged
    return RecordScore(
        **common, flagged=flagged, dfd=s.dfd, hd=s.hd, rmse=s.rmse, avg=s.avg, reached_goal=rec.reached_goal
    )


def score_records(records: Iterable[EvalRecord], cfg: EvalConfig | None = None) -> list[RecordScore]:
    """Scores in id order, independent of input order."""
    return [score_record(r, cfg) for r in sorted(records, key=lambda r: r.id)]


def is_success(score: RecordScore, tau: float = 0.5) -> bool:
    """Trial success for one scored record; raises :class:`MissingTrialFact` if a needed fact is absent."""
    if score.kind == TRAJECTORY:
        if score.reached_goal is None:
            raise MissingTrialFact(f"{score.id}: reached_goal is required")
        return score.reached_goal
    if score.object_present is None:
        raise MissingTrialFact(f"{score.id}: object_present is required")
    if not score.object_present:
        return not score.parse_failure and score.n_pred_boxes == 0
    if score.grasp_success is None:
        raise MissingTrialFact(f"{score.id}: grasp_success is required when an object is present")
    return score.iou >= tau and score.grasp_success


def success_rate(scores: Iterable[RecordScore], tau: float = 0.5) -> float:
    scores = list(scores)
    if not scores:
        raise EmptyInput("no trials")
    return sum(is_success(s, tau) for s in scores) / len(scores)


# ---------------------------------------------------------------------------
# reports
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Report:
    """One report row. IoU is on the 0-100 scale; cells without data are None."""

    name: str
    n: int
    iou: float | None
    dfd: float | None
    hd: float | None
    rmse: float | None
    avg: float | None
    sr: float | None
    parse_failures: int
    flagged: int

    def cells(self) -> dict:
        return {
            "IoU": self.iou, "DFD": self.dfd, "HD": self.hd, "RMSE": self.rmse, "Avg": self.avg,
            "SR": self.sr, "N": self.n, "parse_failures": self.parse_failures,
        }


def _row(name: str, scores: list[RecordScore], tau: float) -> Report:
    aff = [s for s in scores if s.kind == AFFORDANCE]
    traj = [s for s in scores if s.kind == TRAJECTORY]
    means = aggregate(
        scores=[s.trajectory_score for s in traj] if traj else None,
        ious=[s.iou for s in aff] if aff else None,
    )
    try:
        sr = success_rate(scores, tau)
    except (MissingTrialFact, EmptyInput):
        # success needs externally supplied trial facts; without them the cell stays empty
        sr = None
    return Report(
        name=name,
        n=len(scores),
        iou=None if means.iou is None else 100.0 * means.iou,
        dfd=means.dfd, hd=means.hd, rmse=means.rmse, avg=means.avg,
        sr=sr,
        parse_failures=sum(s.parse_failure for s in scores),
        flagged=sum(s.flagged for s in scores),
    )


def build_report(scores: Iterable[RecordScore], tau: float = 0.5) -> list[Report]:
    """One row per kind present (affordance before trajectory) and a final overall row."""
    scores = sorted(scores, key=lambda s: s.id)
    rows = [_row(k, [s for s in scores if s.kind == k], tau) for k in KINDS if any(s.kind == k for s in scores)]
    rows.append(_row(OVERALL, scores, tau))
    return rows


def _fmt(v, table: bool) -> str:
    if v is None:
        return ""
    if isinstance(v, int):
        return str(v)
    return f"{v:.2f}" if table else repr(float(v))


def format_report(rows: list[Report], fmt: str = "table") -> str:
    """Render report rows as an aligned text table or comma-delimited lines."""
    if fmt not in ("table", "delimited"):
        raise ValueError(f"unknown report format {fmt!r}")
    table = fmt == "table"
    header = ["kind", *REPORT_COLUMNS]
    body = [[r.name, *(_fmt(v, table) for v in r.cells().values())] for r in rows]
    if not table:
        return "\n".join(",".join(line) for line in [header, *body]) + "\n"
    widths = [max(len(line[i]) for line in [header, *body]) for i in range(len(header))]
    out = []
    for line in [header, *body]:
        out.append("  ".join(c.ljust(w) if i == 0 else c.rjust(w) for i, (c, w) in enumerate(zip(line, widths))))
    return "\n".join(s.rstrip() for s in out) + "\n"


def emit_report(scores: Iterable[RecordScore], path, fmt: str = "table", tau: float = 0.5) -> str:
    text = format_report(build_report(scores, tau), fmt)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)
    return text


def write_scores(scores: Iterable[RecordScore], path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for s in scores:
            fh.write(s.to_json() + "\n")


def load_scores(path) -> list[RecordScore]:
    out, errors = [], []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                out.append(RecordScore.from_obj(json.loads(line)))
            except (ValueError, TypeError) as exc:
                errors.append((lineno, str(exc)))
    if errors:
        raise SchemaViolation(errors, str(path))
    return out
