"""Discrete Frechet distance and its angle-length augmented (ALAF) variant.

Both distances share one min-max dynamic program over order-preserving
couplings (Eiter & Mannila, 1994)::

    ca(i, j) = max(c(i, j), min(ca(i-1, j), ca(i-1, j-1), ca(i, j-1)))

For the plain distance ``c`` is the Euclidean distance between waypoints.
For ALAF it additionally charges the angle between unit tangents and the
absolute log ratio of local segment lengths::

    c(i, j) = |p_i - q_j| + lambda_theta * angle(t_i, u_j)
                          + lambda_r * |log(l_i / m_j)|

The kernel keeps a single row of the table, so memory is linear in the
shorter trajectory.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numba
import numpy as np

from .geometry import EPS_LEN, as_trajectory, compute_features, dedup

__all__ = [
    "AlafConfig",
    "PairCost",
    "InstanceTooLarge",
    "pair_cost_terms",
    "pair_cost",
    "discrete_frechet",
    "alaf_distance",
    "frechet_bruteforce",
    "BRUTEFORCE_MAX_POINTS",
]

BRUTEFORCE_MAX_POINTS = 7


class InstanceTooLarge(ValueError):
    """Raised when a brute-force enumeration would be intractable."""


@dataclass(frozen=True)
class AlafConfig:
    """Penalty weights for the augmented pair cost.

    ``lambda_theta`` is in coordinate units per radian, ``lambda_r`` in
    coordinate units per unit of log length ratio.
    """

    lambda_theta: float = 10.0
    lambda_r: float = 10.0

    def __post_init__(self):
        for name in ("lambda_theta", "lambda_r"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v >= 0):
                raise ValueError(f"{name} must be finite and >= 0, got {v!r}")


@dataclass(frozen=True)
class PairCost:
    position: float
    angle: float
    length_ratio: float

    def total(self, cfg: AlafConfig) -> float:
        return self.position + cfg.lambda_theta * self.angle + cfg.lambda_r * self.length_ratio


def pair_cost_terms(a_point, a_tangent, a_len, b_point, b_tangent, b_len) -> PairCost:
    """The three unweighted terms of the augmented cost for one waypoint pair."""
    dx = float(a_point[0]) - float(b_point[0])
    dy = float(a_point[1]) - float(b_point[1])
    ax, ay = float(a_tangent[0]), float(a_tangent[1])
    bx, by = float(b_tangent[0]), float(b_tangent[1])
    # atan2 form of arccos(<a,b> / |a||b|): exact 0 for equal tangents, no domain clamp needed
    angle = math.atan2(abs(ax * by - ay * bx), ax * bx + ay * by)
    return PairCost(math.sqrt(dx * dx + dy * dy), angle, abs(math.log(a_len / b_len)))


def pair_cost(a_point, a_tangent, a_len, b_point, b_tangent, b_len, cfg: AlafConfig) -> float:
    """Weighted augmented cost between waypoint ``a`` (prediction) and ``b`` (ground truth)."""
    return pair_cost_terms(a_point, a_tangent, a_len, b_point, b_tangent, b_len).total(cfg)


@numba.njit(cache=True)
def _frechet_kernel(P, Q, HP, HQ, LP, LQ, lam_theta, lam_r, augmented):
    # rows run over P, the rolling row over Q (caller puts the shorter one in Q).
    # HP/HQ are tangent headings in radians, LP/LQ log segment lengths.
    n = P.shape[0]
    m = Q.shape[0]
    row = np.empty(m)
    for i in range(n):
        diag = 0.0
        for j in range(m):
            dx = P[i, 0] - Q[j, 0]
            dy = P[i, 1] - Q[j, 1]
            c = math.sqrt(dx * dx + dy * dy)
            if augmented:
                dh = abs(HP[i] - HQ[j])
                if dh > math.pi:
                    dh = 2.0 * math.pi - dh
                c = c + lam_theta * dh + lam_r * abs(LP[i] - LQ[j])
            if i == 0 and j == 0:
                best = c
            elif i == 0:
                best = max(row[j - 1], c)
            elif j == 0:
                best = max(row[0], c)
            else:
                best = max(min(row[j], diag, row[j - 1]), c)
            if i > 0:
                diag = row[j]
            row[j] = best
    return row[m - 1]


_EMPTY1 = np.empty(0)


def _headings(tangents: np.ndarray) -> np.ndarray:
    # the angle between unit tangents is the folded difference of their headings
    return np.ascontiguousarray(np.arctan2(tangents[:, 1], tangents[:, 0]))


def discrete_frechet(p, q) -> float:
    """Discrete Frechet distance between two waypoint sequences.

    Parameters
    ----------
    p, q : array_like, shape (n, 2) and (m, 2)
        Non-empty trajectories.

    Returns
    -------
    float
        Minimum over order-preserving couplings of the largest Euclidean
        distance between coupled waypoints.

    Examples
    --------
    >>> discrete_frechet([[0, 0], [100, 0]], [[0, 10], [100, 10]])
    10.0
    """
    P = np.ascontiguousarray(as_trajectory(p))
    Q = np.ascontiguousarray(as_trajectory(q))
    if len(Q) > len(P):
        P, Q = Q, P
    return float(_frechet_kernel(P, Q, _EMPTY1, _EMPTY1, _EMPTY1, _EMPTY1, 0.0, 0.0, False))


def alaf_distance(pred, gt, cfg: AlafConfig | None = None, eps_len: float = EPS_LEN) -> float:
    """Angle-length augmented Frechet distance from ``pred`` to ``gt``.

    Both trajectories are deduplicated and their tangent/length features
    computed before the dynamic program. With both weights zero the result
    equals :func:`discrete_frechet` exactly.
    """
    cfg = cfg or AlafConfig()
    P = np.ascontiguousarray(dedup(pred))
    Q = np.ascontiguousarray(dedup(gt))
    TP, LP = compute_features(P, eps_len)
    TQ, LQ = compute_features(Q, eps_len)
    if len(Q) > len(P):
        # the pair cost is symmetric in its arguments, so the table can be transposed
        P, Q, TP, TQ, LP, LQ = Q, P, TQ, TP, LQ, LP
    return float(
        _frechet_kernel(
            P, Q, _headings(TP), _headings(TQ),
            np.ascontiguousarray(np.log(LP)), np.ascontiguousarray(np.log(LQ)),
            float(cfg.lambda_theta), float(cfg.lambda_r), True,
        )
    )


def frechet_bruteforce(p: Sequence, q: Sequence, cost: Callable[[int, int], float] | None = None) -> float:
    """Exact min-max over explicitly enumerated monotone couplings.

    ``cost(i, j)`` gives the pair cost of ``p[i]`` and ``q[j]``; the default
    is the Euclidean distance. This is a test oracle: every coupling path is
    walked, so it is limited to ``BRUTEFORCE_MAX_POINTS`` points per side.
    """
    n, m = len(p), len(q)
    if n == 0 or m == 0:
        raise ValueError("trajectories must be non-empty")
    if n > BRUTEFORCE_MAX_POINTS or m > BRUTEFORCE_MAX_POINTS:
        raise InstanceTooLarge(f"{n}x{m} exceeds {BRUTEFORCE_MAX_POINTS}x{BRUTEFORCE_MAX_POINTS}")
    if cost is None:
        def cost(i, j):
            return math.dist(p[i], q[j])

    table = [[cost(i, j) for j in range(m)] for i in range(n)]
    best = math.inf

    def walk(i, j, worst):
        nonlocal best
        worst = max(worst, table[i][j])
        if i == n - 1 and j == m - 1:
            best = min(best, worst)
            return
        if i + 1 < n:
            walk(i + 1, j, worst)
        if j + 1 < m:
            walk(i, j + 1, worst)
        if i + 1 < n and j + 1 < m:
            walk(i + 1, j + 1, worst)

    walk(0, 0, -math.inf)
    return best
