"""Trajectory representation and local geometry.

A trajectory is an ``(n, 2)`` float array of waypoints in the image-normalized
frame ``[0, 1000)``. Every function here is pure and preserves point order.
"""

from __future__ import annotations

from typing import NamedTuple

import numpy as np

COORD_MIN = 0.0
COORD_MAX = 1000.0
# largest representable coordinate inside the half-open frame
COORD_SUP = float(np.nextafter(COORD_MAX, 0.0))

EPS_LEN = 1e-6
_BLEND_TOL = 1e-12


class TrajectoryFeatures(NamedTuple):
    """Per-waypoint unit tangents ``(n, 2)`` and local segment lengths ``(n,)``."""

    tangents: np.ndarray
    seg_lengths: np.ndarray


def as_trajectory(points) -> np.ndarray:
    """Coerce ``points`` to a read-only ``(n, 2)`` float array with ``n >= 1``."""
    arr = np.array(points, dtype=float)
    if arr.ndim == 1 and arr.size == 2:
        arr = arr.reshape(1, 2)
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise ValueError(f"trajectory must have shape (n, 2), got {arr.shape}")
    if arr.shape[0] == 0:
        raise ValueError("trajectory must contain at least one point")
    if not np.all(np.isfinite(arr)):
        raise ValueError("trajectory coordinates must be finite")
    arr.flags.writeable = False
    return arr


def clamp_points(points) -> tuple[np.ndarray, bool]:
    """Clamp coordinates into ``[0, 1000)``.

    Returns the clamped trajectory and whether any coordinate was moved.
    Model outputs overshoot the frame routinely, so they are scored rather
    than rejected; callers propagate the flag into their records.
    """
    arr = np.array(as_trajectory(points))
    clamped = np.clip(arr, COORD_MIN, COORD_SUP)
    flagged = bool(np.any(clamped != arr))
    clamped.flags.writeable = False
    return clamped, flagged


def dedup(points) -> np.ndarray:
    """Drop consecutive duplicate waypoints.

    >>> dedup([(1, 1), (1, 1), (2, 2)]).tolist()
    [[1.0, 1.0], [2.0, 2.0]]
    """
    arr = as_trajectory(points)
    keep = np.ones(len(arr), dtype=bool)
    keep[1:] = np.any(arr[1:] != arr[:-1], axis=1)
    out = arr[keep]
    out.flags.writeable = False
    return out


def arc_length(points) -> float:
    arr = as_trajectory(points)
    return float(np.sum(np.hypot(*np.diff(arr, axis=0).T)))


def _unit(v: np.ndarray) -> np.ndarray:
    return v / np.linalg.norm(v, axis=-1, keepdims=True)


def compute_features(points, eps_len: float = EPS_LEN) -> TrajectoryFeatures:
    """Unit tangent and local segment length at every waypoint.

    Endpoints use the forward/backward difference. Interior tangents are the
    normalized sum of the unit incoming and outgoing segment directions; on a
    180 degree reversal that sum vanishes and the outgoing direction is used.
    The segment length at vertex ``i`` is the distance to ``i + 1`` (to
    ``i - 1`` for the last vertex), floored at ``eps_len``.

    A single point gets tangent ``(1, 0)`` and length ``eps_len``.

    Raises
    ------
    ValueError
        If the trajectory has consecutive duplicate points; call :func:`dedup`
        first.
    """
    arr = as_trajectory(points)
    n = len(arr)
    if n == 1:
        tangents = np.array([[1.0, 0.0]])
        lengths = np.array([eps_len])
        return TrajectoryFeatures(tangents, lengths)

    seg = np.diff(arr, axis=0)
    seg_len = np.hypot(seg[:, 0], seg[:, 1])
    if np.any(seg_len == 0.0):
        raise ValueError("consecutive duplicate waypoints; dedup the trajectory first")
    dirs = seg / seg_len[:, None]

    tangents = np.empty((n, 2))
    tangents[0] = dirs[0]
    tangents[-1] = dirs[-1]
    if n > 2:
        blend = dirs[:-1] + dirs[1:]
        norm = np.hypot(blend[:, 0], blend[:, 1])
        reversal = norm < _BLEND_TOL
        safe = np.where(reversal, 1.0, norm)
        tangents[1:-1] = np.where(reversal[:, None], dirs[1:], blend / safe[:, None])

    lengths = np.empty(n)
    lengths[:-1] = seg_len
    lengths[-1] = seg_len[-1]
    np.maximum(lengths, eps_len, out=lengths)
    return TrajectoryFeatures(tangents, lengths)


def resample(points, k: int) -> np.ndarray:
    """Resample to ``k`` points spaced uniformly by arc length.

    Samples lie on the original polyline; the first and last samples are the
    original endpoints. A single-point (or zero-length) trajectory yields its
    first point repeated ``k`` times.
    """
    if k < 2:
        raise ValueError(f"k must be >= 2, got {k}")
    arr = as_trajectory(points)
    seg_len = np.hypot(*np.diff(arr, axis=0).T)
    cum = np.concatenate([[0.0], np.cumsum(seg_len)])
    total = cum[-1]
    if total == 0.0:
        out = np.repeat(arr[:1], k, axis=0)
    else:
        s = np.linspace(0.0, total, k)
        out = np.column_stack([np.interp(s, cum, arr[:, 0]), np.interp(s, cum, arr[:, 1])])
        out[0] = arr[0]
        out[-1] = arr[-1]
    out.flags.writeable = False
    return out
