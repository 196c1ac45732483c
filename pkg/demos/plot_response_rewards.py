"""
Scoring raw model responses
===========================

A response must carry a ``<think>`` block followed by an ``<output>``
block. Malformed text earns neither the format nor the task reward.
"""

from vla_rewards import composite_reward, format_reward, parse_response
from vla_rewards.response_format import ParseError

gt_box = [100, 100, 300, 260]

responses = {
    "exact": "<think>the mug handle</think><output>[[100,100,300,260]]</output>",
    "offset": "<think>left of the handle</think><output>[[60,100,260,260]]</output>",
    "far away": "<think>guess</think><output>[[700,700,800,800]]</output>",
    "no think": "<output>[[100,100,300,260]]</output>",
    "trailing": "<think></think><output>[[100,100,300,260]]</output> done",
}

for name, raw in responses.items():
    try:
        parse_response(raw, "affordance")
        status = "ok"
    except ParseError as exc:
        status = type(exc).__name__
    print(f"{name:9s} format {format_reward(raw, 'affordance')}  "
          f"reward {composite_reward(raw, gt_box, 'affordance'):+.3f}  ({status})")
