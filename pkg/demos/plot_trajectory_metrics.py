"""
Comparing predicted waypoint paths
==================================

Three predictions of the same ground-truth path, scored with the plain
and the angle-length augmented Frechet distance, Hausdorff and RMSE.
"""

import numpy as np

from vla_rewards import alaf_distance, discrete_frechet, hausdorff, rmse, traj_reward

gt = np.array([[100, 100], [250, 120], [400, 200], [500, 350]], dtype=float)

# a shifted copy keeps the shape; a reversed copy visits the same points backwards
shifted = gt + [0, 40]
reversed_ = gt[::-1]
zigzag = np.array([[100, 100], [250, 60], [400, 260], [500, 350]], dtype=float)

for name, pred in [("shifted", shifted), ("reversed", reversed_), ("zigzag", zigzag)]:
    print(f"{name:9s} DFD {discrete_frechet(pred, gt):7.2f}  ALAF {alaf_distance(pred, gt):7.2f}  "
          f"HD {hausdorff(pred, gt):7.2f}  RMSE {rmse(pred, gt):7.2f}  reward {traj_reward(pred, gt):.3f}")

# Hausdorff ignores order, so the reversed path looks perfect to it,
# while both Frechet variants see the full reversal.
