"""Strict parser and canonical serializer for ``<think>...</think><output>...</output>`` responses.

Grammar (tags are exact and case-sensitive)::

    response   := WS? "<think>" TEXT "</think>" WS? "<output>" payload "</output>" WS?
    payload    := WS? "[" WS? (item (WS? "," WS? item)*)? WS? "]" WS?
    item       := "[" WS? NUMBER (WS? "," WS? NUMBER)* WS? "]"
    NUMBER     := [+-]? (DIGITS ("." DIGITS?)? | "." DIGITS)

``TEXT`` may not contain any of the four tags. Affordance items carry four
numbers ``x1,y1,x2,y2`` and the list may be empty (no object); trajectory
items carry two numbers ``x,y`` and there must be at least two of them.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Union

import numpy as np

from .geometry import clamp_points
from .metrics import Box, normalize_box

AFFORDANCE = "affordance"
TRAJECTORY = "trajectory"
KINDS = (AFFORDANCE, TRAJECTORY)

THINK_OPEN, THINK_CLOSE = "<think>", "</think>"
OUTPUT_OPEN, OUTPUT_CLOSE = "<output>", "</output>"
_TAGS = (THINK_OPEN, THINK_CLOSE, OUTPUT_OPEN, OUTPUT_CLOSE)

_WS = re.compile(r"\s*")
_NUMBER = re.compile(r"[+-]?(?:\d+(?:\.\d*)?|\.\d+)")
_ARITY = {AFFORDANCE: 4, TRAJECTORY: 2}


class ParseError(ValueError):
    """Base class for response format violations.

    ``offset`` is the position of the first failure, in bytes when the
    response was given as bytes and in characters otherwise.
    """

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (at offset {offset})")
        self.message = message
        self.offset = offset


class MissingThink(ParseError):
    pass


class MissingOutput(ParseError):
    pass


class OrderViolation(ParseError):
    pass


class TrailingGarbage(ParseError):
    pass


class PayloadSyntax(ParseError):
    pass


@dataclass(frozen=True)
class AffordancePayload:
    boxes: tuple[Box, ...] = ()
    flagged: bool = field(default=False, compare=False)


@dataclass(frozen=True)
class TrajectoryPayload:
    waypoints: tuple[tuple[float, float], ...]
    flagged: bool = field(default=False, compare=False)

    def __post_init__(self):
        if len(self.waypoints) < 2:
            raise ValueError("a trajectory payload needs at least two waypoints")

    def as_array(self) -> np.ndarray:
        return np.array(self.waypoints, dtype=float)


Payload = Union[AffordancePayload, TrajectoryPayload]


@dataclass(frozen=True)
class ParsedResponse:
    think: str
    payload: Payload


def make_payload(kind: str, values) -> Payload:
    """Build a payload from nested number lists, clamping and flagging as needed."""
    if kind == AFFORDANCE:
        boxes, flagged = [], False
        for item in values:
            box, f = normalize_box(item)
            boxes.append(box)
            flagged |= f
        return AffordancePayload(tuple(boxes), flagged)
    if kind == TRAJECTORY:
        values = list(values)
        if len(values) < 2:
            raise ValueError("a trajectory payload needs at least two waypoints")
        pts, flagged = clamp_points(values)
        return TrajectoryPayload(tuple((float(x), float(y)) for x, y in pts), flagged)
    raise ValueError(f"unknown kind {kind!r}")


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------

def format_number(x: float) -> str:
    """Shortest positional decimal that round-trips; integral values print without a point."""
    x = float(x)
    if x == 0:
        return "0"
    return np.format_float_positional(x, unique=True, trim="-")


def serialize_payload(payload: Payload) -> str:
    """Canonical payload text: ``[[x1,y1,x2,y2],...]`` or ``[[x,y],...]``, no whitespace."""
    if isinstance(payload, AffordancePayload):
        items = [b.as_tuple() for b in payload.boxes]
    elif isinstance(payload, TrajectoryPayload):
        items = payload.waypoints
    else:
        raise TypeError(f"not a payload: {payload!r}")
    return "[" + ",".join("[" + ",".join(format_number(v) for v in it) + "]" for it in items) + "]"


def wrap_response(think: str, payload: Payload | str) -> str:
    body = payload if isinstance(payload, str) else serialize_payload(payload)
    return f"{THINK_OPEN}{think}{THINK_CLOSE}{OUTPUT_OPEN}{body}{OUTPUT_CLOSE}"


# ---------------------------------------------------------------------------
# parsing
# ---------------------------------------------------------------------------

def _skip_ws(text: str, pos: int) -> int:
    return _WS.match(text, pos).end()


def _parse_payload(text: str, start: int, end: int, kind: str) -> Payload:
    arity = _ARITY[kind]
    pos = _skip_ws(text, start)

    def expect(ch: str, where: int) -> int:
        if where >= end or text[where] != ch:
            raise PayloadSyntax(f"expected {ch!r}", where)
        return where + 1

    def number(where: int) -> tuple[float, int]:
        m = _NUMBER.match(text, where, end)
        if m is None:
            raise PayloadSyntax("expected a number", where)
        return float(m.group()), m.end()

    pos = expect("[", pos)
    items: list[list[float]] = []
    pos = _skip_ws(text, pos)
    if pos < end and text[pos] == "]":
        pos += 1
    else:
        while True:
            item_start = pos
            pos = expect("[", pos)
            vals: list[float] = []
            while True:
                pos = _skip_ws(text, pos)
                v, pos = number(pos)
                vals.append(v)
                pos = _skip_ws(text, pos)
                if pos < end and text[pos] == ",":
                    pos += 1
                    continue
                pos = expect("]", pos)
                break
            if len(vals) != arity:
                raise PayloadSyntax(f"{kind} items need {arity} numbers, got {len(vals)}", item_start)
            items.append(vals)
            pos = _skip_ws(text, pos)
            if pos < end and text[pos] == ",":
                pos = _skip_ws(text, pos + 1)
                continue
            pos = expect("]", pos)
            break
    pos = _skip_ws(text, pos)
    if pos != end:
        raise PayloadSyntax("unexpected content after payload list", pos)
    if kind == TRAJECTORY and len(items) < 2:
        raise PayloadSyntax("a trajectory needs at least two waypoints", start)
    try:
        return make_payload(kind, items)
    except ValueError as exc:
        # e.g. a digit string long enough to overflow to inf
        raise PayloadSyntax(str(exc), start) from None


def _first_tag(text: str, start: int, end: int) -> tuple[int, str] | None:
    hits = [(i, t) for t in _TAGS if (i := text.find(t, start, end)) >= 0]
    return min(hits) if hits else None


def _parse_text(text: str, kind: str) -> ParsedResponse:
    pos = _skip_ws(text, 0)
    if not text.startswith(THINK_OPEN, pos):
        out_at = text.find(OUTPUT_OPEN)
        think_at = text.find(THINK_OPEN)
        if 0 <= out_at < think_at:
            raise OrderViolation("<output> precedes <think>", out_at)
        raise MissingThink("response must begin with <think>", pos)
    think_start = pos + len(THINK_OPEN)
    think_end = text.find(THINK_CLOSE, think_start)
    if think_end < 0:
        raise MissingThink("unterminated <think> block", pos)
    stray = _first_tag(text, think_start, think_end)
    if stray is not None:
        raise OrderViolation(f"unexpected {stray[1]} inside <think> block", stray[0])

    pos = _skip_ws(text, think_end + len(THINK_CLOSE))
    if not text.startswith(OUTPUT_OPEN, pos):
        if text.startswith(THINK_OPEN, pos):
            raise OrderViolation("second <think> block", pos)
        raise MissingOutput("expected <output> after </think>", pos)
    out_start = pos + len(OUTPUT_OPEN)
    out_end = text.find(OUTPUT_CLOSE, out_start)
    if out_end < 0:
        raise MissingOutput("unterminated <output> block", pos)
    stray = _first_tag(text, out_start, out_end)
    if stray is not None:
        raise OrderViolation(f"unexpected {stray[1]} inside <output> block", stray[0])

    pos = _skip_ws(text, out_end + len(OUTPUT_CLOSE))
    if pos != len(text):
        raise TrailingGarbage("content after </output>", pos)

    payload = _parse_payload(text, out_start, out_end, kind)
    return ParsedResponse(text[think_start:think_end], payload)


def parse_response(raw: str | bytes, kind: str) -> ParsedResponse:
    """Parse a full model response for the given task kind.

    Raises a :class:`ParseError` subclass on the first violation.
    """
    if kind not in KINDS:
        raise ValueError(f"unknown kind {kind!r}")
    if isinstance(raw, (bytes, bytearray)):
        try:
            text = bytes(raw).decode("utf-8")
        except UnicodeDecodeError as exc:
            raise ParseError("response is not valid UTF-8", exc.start) from None
        try:
            return _parse_text(text, kind)
        except ParseError as exc:
            raise type(exc)(exc.message, len(text[: exc.offset].encode("utf-8"))) from None
    return _parse_text(raw, kind)


def format_reward(raw: str | bytes, kind: str) -> int:
    """1 if ``raw`` parses as a well-formed response of ``kind``, else 0. Never raises."""
    try:
        parse_response(raw, kind)
    except Exception:
        return 0
    return 1
