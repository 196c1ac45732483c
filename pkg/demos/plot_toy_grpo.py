"""
GRPO on a toy waypoint task
===========================

A tabular softmax policy picks one grid cell per step. Each sampled path
is rendered as a response, rewarded against the ground truth, and the
policy follows the GRPO gradient.
"""

import numpy as np

from vla_rewards.grpo import GrpoConfig
from vla_rewards.toy_trainer import SoftmaxPolicy, decode_tokens, default_tasks, train

tasks = default_tasks()
policy = SoftmaxPolicy.uniform(len(tasks))
log = train(tasks, policy, GrpoConfig(), iterations=200, seed=0)

r = np.asarray(log.mean_reward)
for start in range(0, len(r), 40):
    print(f"iterations {start:3d}-{start + 39:3d}  mean reward {r[start:start + 40].mean():.3f}")
print(log.summary())

# greedy path for the first task next to its ground truth
greedy = policy.probs()[policy.states(0)].argmax(axis=1)
print("ground truth", tasks[0].gt_traj.tolist())
print("greedy      ", decode_tokens(greedy).tolist())
