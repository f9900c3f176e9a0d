"""Geometric waypoint prediction from a panoramic depth scan.

A cell (i, j) of the 120x12 heatmap is navigable when the scan shows free
space along ray i out to the bin distance plus a clearance margin, so every
waypoint derived from a ground-truth scan is reachable along the straight
segment from the origin.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

ANGLE_BINS = 120
DIST_BINS = 12
ANGLE_STEP_DEG = 3.0
DIST_STEP_M = 0.25      # bin j covers 0.25 * (j + 1) meters, 0.25 .. 3.00
CLEARANCE_M = 0.2
MAX_WAYPOINT_RANGE = DIST_STEP_M * DIST_BINS
SUPPRESS_BINS = 5       # +-15 degrees of angular suppression
DEFAULT_K = 5

_BIN_DISTS = DIST_STEP_M * (np.arange(DIST_BINS) + 1)


@dataclass(frozen=True)
class Waypoint:
    position: tuple      # (x, y) meters, same frame as the origin
    angle_bin: int
    dist_bin: int
    score: float


def bin_distance(j: int) -> float:
    return DIST_STEP_M * (j + 1)


def predict_heatmap(obs: np.ndarray) -> np.ndarray:
    """Binary 120x12 navigability heatmap from a 120-ray scan."""
    obs = np.asarray(obs, dtype=float)
    if obs.shape != (ANGLE_BINS,):
        raise ValueError(f"expected a {ANGLE_BINS}-ray scan, got shape {obs.shape}")
    return (obs[:, None] >= _BIN_DISTS[None, :] + CLEARANCE_M).astype(float)


def waypoint_position(origin, angle_bin: int, dist_bin: int):
    rad = math.radians(angle_bin * ANGLE_STEP_DEG)
    d = bin_distance(dist_bin)
    return (origin[0] + d * math.cos(rad), origin[1] + d * math.sin(rad))


def select_waypoints(heatmap: np.ndarray, origin, k: int = DEFAULT_K) -> list[Waypoint]:
    """Greedy farthest-first non-maximum suppression over the heatmap.

    Repeatedly takes the farthest navigable cell among the remaining angles
    (ties: lower angle bin, then lower distance bin) and suppresses all cells
    within +-SUPPRESS_BINS angle bins. Returns at most k waypoints.
    """
    if k < 1:
        raise ValueError("k must be at least 1")
    hm = np.asarray(heatmap)
    if hm.shape != (ANGLE_BINS, DIST_BINS):
        raise ValueError(f"expected a {ANGLE_BINS}x{DIST_BINS} heatmap, got {hm.shape}")
    if hasattr(origin, "x"):
        origin = (origin.x, origin.y)

    navigable = hm > 0.5
    # farthest navigable bin per angle, -1 where the whole row is blocked
    best_j = np.where(navigable.any(axis=1),
                      DIST_BINS - 1 - navigable[:, ::-1].argmax(axis=1), -1)
    alive = best_j >= 0
    out = []
    while len(out) < k and alive.any():
        dists = np.where(alive, best_j, -1)
        jmax = dists.max()
        i = int(np.argmax(dists == jmax))  # lowest angle bin among the farthest
        j = int(best_j[i])
        out.append(Waypoint(position=waypoint_position(origin, i, j),
                            angle_bin=i, dist_bin=j, score=float(hm[i, j])))
        span = np.arange(i - SUPPRESS_BINS, i + SUPPRESS_BINS + 1) % ANGLE_BINS
        alive[span] = False
    return out


def angle_bin_of(dx: float, dy: float) -> int:
    deg = math.degrees(math.atan2(dy, dx)) % 360.0
    return int(round(deg / ANGLE_STEP_DEG)) % ANGLE_BINS


def detects(scan: np.ndarray, from_pos, to_pos) -> bool:
    """Whether to_pos shows up as navigable in the heatmap of a scan taken at
    from_pos, using the nearest angle/distance bins."""
    dx = to_pos[0] - from_pos[0]
    dy = to_pos[1] - from_pos[1]
    d = math.hypot(dx, dy)
    j = int(round(d / DIST_STEP_M)) - 1
    if not (0 <= j < DIST_BINS):
        return False
    i = angle_bin_of(dx, dy)
    return bool(scan[i] >= bin_distance(j) + CLEARANCE_M)
