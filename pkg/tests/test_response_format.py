import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from vla_rewards.metrics import Box
from vla_rewards.response_format import (
    AFFORDANCE,
    TRAJECTORY,
    AffordancePayload,
    MissingOutput,
    MissingThink,
    OrderViolation,
    ParseError,
    PayloadSyntax,
    TrailingGarbage,
    TrajectoryPayload,
    format_number,
    format_reward,
    make_payload,
    parse_response,
    serialize_payload,
    wrap_response,
)

coord = st.one_of(
    st.integers(0, 999).map(float),
    st.floats(0, 999.999999, allow_nan=False, allow_infinity=False),
)


@st.composite
def boxes(draw):
    x1, x2 = sorted((draw(coord), draw(coord)))
    y1, y2 = sorted((draw(coord), draw(coord)))
    return Box(x1, y1, x2, y2)


aff_payloads = st.lists(boxes(), max_size=4).map(lambda bs: AffordancePayload(tuple(bs)))
traj_payloads = st.lists(st.tuples(coord, coord), min_size=2, max_size=10).map(
    lambda ps: TrajectoryPayload(tuple(ps)))


def test_affordance_example():
    r = parse_response("<think>red bowl is leftmost</think><output>[[100,200,300,400]]</output>", AFFORDANCE)
    assert r.think == "red bowl is leftmost"
    assert r.payload == AffordancePayload((Box(100, 200, 300, 400),))
    assert serialize_payload(r.payload) == "[[100,200,300,400]]"


def test_trajectory_example():
    r = parse_response("<think>a</think><output>[[0,0],[10,10],[20,5]]</output>", TRAJECTORY)
    assert r.payload.waypoints == ((0, 0), (10, 10), (20, 5))
    assert parse_response(wrap_response(r.think, r.payload), TRAJECTORY) == r


def test_missing_think():
    with pytest.raises(MissingThink):
        parse_response("<output>[[1,2],[3,4]]</output>", TRAJECTORY)
    with pytest.raises(MissingThink):
        parse_response("<think>never closed<output>[]</output>", AFFORDANCE)


@pytest.mark.parametrize(
    "text, err",
    [
        ("<think>a</think>", MissingOutput),
        ("<think>a</think>junk<output>[]</output>", MissingOutput),
        ("<think>a</think><output>[]", MissingOutput),
        ("<output>[]</output><think>a</think>", OrderViolation),
        ("<think>a</think><think>b</think><output>[]</output>", OrderViolation),
        ("<think>a<output>x</think><output>[]</output>", OrderViolation),
        ("<think>a</think><output>[]</output>tail", TrailingGarbage),
        ("<think>a</think><output>[]</output><output>[]</output>", TrailingGarbage),
        ("<think>a</think><output>[[1,2,3]]</output>", PayloadSyntax),
        ("<think>a</think><output>[[1,2,3,4],]</output>", PayloadSyntax),
        ("<think>a</think><output>[1,2,3,4]</output>", PayloadSyntax),
        ("<think>a</think><output>[[1,2,3,4e2]]</output>", PayloadSyntax),
        ("<THINK>a</THINK><output>[]</output>", MissingThink),
    ],
)
def test_errors(text, err):
    with pytest.raises(err) as info:
        parse_response(text, AFFORDANCE)
    assert info.value.offset >= 0
    assert format_reward(text, AFFORDANCE) == 0


def test_error_offsets():
    text = "<think>a</think><output>[[1,2,x,4]]</output>"
    with pytest.raises(PayloadSyntax) as info:
        parse_response(text, AFFORDANCE)
    assert text[info.value.offset] == "x"
    with pytest.raises(TrailingGarbage) as info:
        parse_response("<think>é</think><output>[]</output>!", AFFORDANCE)
    assert info.value.offset == 35
    with pytest.raises(TrailingGarbage) as info:
        parse_response("<think>é</think><output>[]</output>!".encode(), AFFORDANCE)
    assert info.value.offset == 36  # bytes: é is two bytes


def test_whitespace_tolerance():
    text = "  \n<think> spaced  </think>\n<output> [ [ 1 , 2 , 3 , 4 ] ,[5,6,7,8] ] </output>\n"
    r = parse_response(text, AFFORDANCE)
    assert r.think == " spaced  "
    assert len(r.payload.boxes) == 2


def test_number_forms_and_clamping():
    r = parse_response("<think></think><output>[[-5,+2.5],[.5,1200.]]</output>", TRAJECTORY)
    assert r.payload.flagged
    assert r.payload.waypoints[0] == (0.0, 2.5)
    assert r.payload.waypoints[1][0] == 0.5 and r.payload.waypoints[1][1] < 1000


def test_no_object_and_single_waypoint():
    assert parse_response("<think>nothing</think><output>[]</output>", AFFORDANCE).payload.boxes == ()
    with pytest.raises(PayloadSyntax):
        parse_response("<think>x</think><output>[[1,2]]</output>", TRAJECTORY)
    with pytest.raises(PayloadSyntax):
        parse_response("<think>x</think><output>[]</output>", TRAJECTORY)


def test_overflowing_number_is_payload_error():
    text = "<think></think><output>[[" + "9" * 400 + ",1],[2,3]]</output>"
    with pytest.raises(PayloadSyntax):
        parse_response(text, TRAJECTORY)


def test_serialize_examples():
    assert serialize_payload(AffordancePayload((Box(0, 0, 10, 10),))) == "[[0,0,10,10]]"
    assert serialize_payload(AffordancePayload(())) == "[]"
    assert serialize_payload(TrajectoryPayload(((0, 0), (500, 250)))) == "[[0,0],[500,250]]"
    assert format_number(12.5) == "12.5"
    assert format_number(0.1) == "0.1"
    assert format_number(1e-5) == "0.00001"
    assert format_number(-0.0) == "0"


def test_format_reward_examples():
    assert format_reward("<think>ok</think><output>[[1,2,3,4]]</output>", AFFORDANCE) == 1
    assert format_reward("just some text", AFFORDANCE) == 0
    assert format_reward("<think>ok</think><output>[[1,2,3]]</output>", AFFORDANCE) == 0
    assert format_reward("<think>ok</think><output>[[1,2,3,4]]</output>", "bogus") == 0
    assert format_reward(b"\xff\xfe", TRAJECTORY) == 0


@given(aff_payloads)
def test_affordance_round_trip(payload):
    text = serialize_payload(payload)
    assert " " not in text
    assert parse_response(wrap_response("t", payload), AFFORDANCE).payload == payload
    assert format_reward(wrap_response("t", payload), AFFORDANCE) == 1


@given(traj_payloads)
def test_trajectory_round_trip(payload):
    assert parse_response(wrap_response("t", payload), TRAJECTORY).payload == payload
    assert format_reward(wrap_response("t", payload), TRAJECTORY) == 1


@settings(max_examples=500)
@given(st.binary(max_size=80), st.sampled_from([AFFORDANCE, TRAJECTORY]))
def test_format_reward_total_on_bytes(data, kind):
    assert format_reward(data, kind) in (0, 1)


@settings(max_examples=500)
@given(st.text(alphabet=st.sampled_from(list("<>/thinkoutp[],.0123456789- \n")), max_size=60),
       st.sampled_from([AFFORDANCE, TRAJECTORY]))
def test_parse_raises_only_parse_errors(text, kind):
    try:
        parse_response(text, kind)
    except ParseError:
        pass


def test_make_payload_rejects_unknown_kind():
    with pytest.raises(ValueError):
        make_payload("mask", [])
