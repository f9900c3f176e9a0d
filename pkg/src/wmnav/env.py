"""Continuous 2D worlds on an occupancy grid.

The world is a closed rectangle discretised at 0.1 m. Positions are continuous
(x east, y north, meters); the grid is only consulted for collision, sensing
and shortest paths. All functions here are pure and deterministic; FloorPlan
is immutable after generation and safe to share between episodes.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from enum import Enum

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components, dijkstra

CELL_SIZE = 0.1        # meters per grid cell
MAX_SCAN_RANGE = 5.0   # depth scan clamp, meters
NUM_RAYS = 120         # one ray per 3 degrees of absolute world angle
RAY_STEP_DEG = 3.0
TURN_DEG = 15.0
FORWARD_M = 0.25
UNREACHABLE = math.inf


class ParameterError(ValueError):
    """Generation parameters outside the supported range."""


class PoseInObstacleError(ValueError):
    """Sensing requested from inside an occupied cell."""


class SamplingError(RuntimeError):
    """Episode rejection sampling exhausted its attempt budget."""


class Action(Enum):
    TURN_LEFT = "turn_left_15"
    TURN_RIGHT = "turn_right_15"
    FORWARD = "forward_025"
    STOP = "stop"


@dataclass(frozen=True)
class Pose:
    """Agent pose: continuous position plus a heading quantised to 3 degrees."""

    x: float
    y: float
    heading: float = 0.0

    def __post_init__(self):
        h = self.heading % 360.0
        if abs(h / RAY_STEP_DEG - round(h / RAY_STEP_DEG)) > 1e-9:
            raise ValueError(f"heading {self.heading} is not a multiple of {RAY_STEP_DEG} degrees")
        object.__setattr__(self, "heading", h)

    @property
    def position(self) -> np.ndarray:
        return np.array([self.x, self.y])


@dataclass(eq=False)
class FloorPlan:
    """Occupancy grid world. cells[row, col] is True where blocked."""

    cells: np.ndarray
    cell_size: float
    seed: int
    rooms: list  # (x0, y0, width, height) rectangles in meters, metadata only

    def __post_init__(self):
        self.cells.setflags(write=False)
        self._graph_cache = None
        self._field_cache = {}
        self._scan_cache = {}

    # pickling support for worker processes: caches are rebuilt lazily
    def __getstate__(self):
        return {"cells": self.cells, "cell_size": self.cell_size,
                "seed": self.seed, "rooms": self.rooms}

    def __setstate__(self, state):
        self.cells = state["cells"]
        self.cell_size = state["cell_size"]
        self.seed = state["seed"]
        self.rooms = state["rooms"]
        self.__post_init__()

    @property
    def shape(self):
        return self.cells.shape

    @property
    def width_m(self) -> float:
        return self.cells.shape[1] * self.cell_size

    @property
    def height_m(self) -> float:
        return self.cells.shape[0] * self.cell_size

    def cell_of(self, x: float, y: float):
        return int(math.floor(y / self.cell_size)), int(math.floor(x / self.cell_size))

    def in_bounds(self, x: float, y: float) -> bool:
        return 0.0 <= x < self.width_m and 0.0 <= y < self.height_m

    def is_free(self, x: float, y: float) -> bool:
        if not self.in_bounds(x, y):
            return False
        r, c = self.cell_of(x, y)
        return not self.cells[r, c]

    def cell_center(self, row: int, col: int):
        return ((col + 0.5) * self.cell_size, (row + 0.5) * self.cell_size)


# ---------------------------------------------------------------------------
# generation

def generate_floorplan(seed: int, width_m: float = 20.0, height_m: float = 20.0,
                       room_count: int = 5, corridor_width_m: float = 1.0) -> FloorPlan:
    """Carve rooms out of solid rock and join them with L-shaped corridors.

    Deterministic for a fixed (seed, params). Every placed room center ends up
    in one free connected component.
    """
    if width_m < 5.0 or height_m < 5.0:
        raise ParameterError(f"plan dimensions must be at least 5 m, got {width_m}x{height_m}")
    if room_count < 1:
        raise ParameterError("room_count must be at least 1")

    rng = np.random.default_rng(seed)
    cs = CELL_SIZE
    rows, cols = int(round(height_m / cs)), int(round(width_m / cs))
    occ = np.ones((rows, cols), dtype=bool)

    def carve(r0, r1, c0, c1):
        # never touch the 1-cell border ring, the world stays closed
        occ[max(r0, 1):min(r1, rows - 1), max(c0, 1):min(c1, cols - 1)] = False

    min_side = max(2.0, 2.0 * corridor_width_m)
    max_side = min(6.0, width_m / 2.0, height_m / 2.0)
    rooms = []
    placed_cells = []
    for _ in range(room_count):
        for _attempt in range(200):
            w = rng.uniform(min_side, max_side)
            h = rng.uniform(min_side, max_side)
            x0 = rng.uniform(0.2, width_m - w - 0.2)
            y0 = rng.uniform(0.2, height_m - h - 0.2)
            c0, c1 = int(x0 / cs), int((x0 + w) / cs)
            r0, r1 = int(y0 / cs), int((y0 + h) / cs)
            # keep at least a 3-cell wall between rooms so they stay distinct
            pad = 3
            ok = True
            for (pr0, pr1, pc0, pc1) in placed_cells:
                if r0 < pr1 + pad and r1 > pr0 - pad and c0 < pc1 + pad and c1 > pc0 - pad:
                    ok = False
                    break
            if ok:
                carve(r0, r1, c0, c1)
                placed_cells.append((r0, r1, c0, c1))
                rooms.append((x0, y0, w, h))
                break

    # connect each room to the nearest already-connected one
    centers = [((x0 + w / 2.0), (y0 + h / 2.0)) for (x0, y0, w, h) in rooms]
    half = max(1, int(round(corridor_width_m / cs / 2)))
    connected = [0]
    for i in range(1, len(centers)):
        j = min(connected, key=lambda j: (centers[i][0] - centers[j][0]) ** 2
                                         + (centers[i][1] - centers[j][1]) ** 2)
        (xa, ya), (xb, yb) = centers[i], centers[j]
        ra, ca = int(ya / cs), int(xa / cs)
        rb, cb = int(yb / cs), int(xb / cs)
        # horizontal leg at row ra, then vertical leg at col cb
        carve(ra - half, ra + half, min(ca, cb), max(ca, cb) + 1)
        carve(min(ra, rb), max(ra, rb) + 1, cb - half, cb + half)
        connected.append(i)

    plan = FloorPlan(cells=occ, cell_size=cs, seed=seed, rooms=rooms)
    n_free = int((~occ).sum())
    if n_free < 100:
        raise ParameterError(f"degenerate plan: only {n_free} free cells")
    return plan


# ---------------------------------------------------------------------------
# motion

def _segment_free(plan: FloorPlan, x0, y0, x1, y1) -> bool:
    """True when the straight segment stays in free cells (sampled at cs/4)."""
    dist = math.hypot(x1 - x0, y1 - y0)
    n = max(2, int(math.ceil(dist / (plan.cell_size / 4.0))) + 1)
    ts = np.linspace(0.0, 1.0, n)
    xs = x0 + ts * (x1 - x0)
    ys = y0 + ts * (y1 - y0)
    cols = np.floor(xs / plan.cell_size).astype(int)
    rows = np.floor(ys / plan.cell_size).astype(int)
    h, w = plan.shape
    if (cols < 0).any() or (cols >= w).any() or (rows < 0).any() or (rows >= h).any():
        return False
    return not plan.cells[rows, cols].any()


def step(plan: FloorPlan, pose: Pose, action: Action) -> Pose:
    """One low-level action. Forward motion slides along the free axis when
    the commanded motion is blocked; fully blocked motion is a no-op."""
    if action is Action.STOP:
        return pose
    if action is Action.TURN_LEFT:
        return Pose(pose.x, pose.y, (pose.heading + TURN_DEG) % 360.0)
    if action is Action.TURN_RIGHT:
        return Pose(pose.x, pose.y, (pose.heading - TURN_DEG) % 360.0)

    rad = math.radians(pose.heading)
    dx, dy = FORWARD_M * math.cos(rad), FORWARD_M * math.sin(rad)
    if _segment_free(plan, pose.x, pose.y, pose.x + dx, pose.y + dy):
        return Pose(pose.x + dx, pose.y + dy, pose.heading)
    # slide: project onto the axis with the larger motion component first
    trials = [(dx, 0.0), (0.0, dy)] if abs(dx) >= abs(dy) else [(0.0, dy), (dx, 0.0)]
    for sx, sy in trials:
        if (sx != 0.0 or sy != 0.0) and _segment_free(plan, pose.x, pose.y, pose.x + sx, pose.y + sy):
            return Pose(pose.x + sx, pose.y + sy, pose.heading)
    return pose


# ---------------------------------------------------------------------------
# sensing

_RAY_ANGLES = np.radians(np.arange(NUM_RAYS) * RAY_STEP_DEG)
_RAY_COS = np.cos(_RAY_ANGLES)
_RAY_SIN = np.sin(_RAY_ANGLES)


def _raycast_all(plan: FloorPlan, x0: float, y0: float) -> np.ndarray:
    """Exact distances from (x0, y0) to the first occupied cell along all 120
    rays, clamped to MAX_SCAN_RANGE. Uses grid-line crossings, so distances to
    axis-aligned walls are exact."""
    cs = plan.cell_size
    h, w = plan.shape
    K = int(math.ceil(MAX_SCAN_RANGE / cs)) + 1

    def crossings(d, p0):
        # parametric distances at which each ray crosses successive grid lines;
        # rays parallel to the lines get crossings pushed beyond max range
        far = 2.0 * MAX_SCAN_RANGE
        ad = np.abs(d)
        first = np.where(d > 0, (np.floor(p0 / cs) + 1) * cs - p0,
                         p0 - np.ceil(p0 / cs - 1) * cs)
        safe = np.maximum(ad, 1e-12)
        t0 = np.where(ad > 1e-12, first / safe, far)
        dt = np.where(ad > 1e-12, cs / safe, far)
        k = np.arange(K)
        return t0[:, None] + k[None, :] * dt[:, None]

    t = np.concatenate([crossings(_RAY_COS, x0), crossings(_RAY_SIN, y0),
                        np.full((NUM_RAYS, 1), MAX_SCAN_RANGE)], axis=1)
    np.clip(t, 0.0, MAX_SCAN_RANGE, out=t)
    t.sort(axis=1)
    t = np.concatenate([np.zeros((NUM_RAYS, 1)), t], axis=1)
    seg_len = np.diff(t, axis=1)
    mid = (t[:, :-1] + t[:, 1:]) / 2.0
    px = x0 + mid * _RAY_COS[:, None]
    py = y0 + mid * _RAY_SIN[:, None]
    col = np.floor(px / cs).astype(int)
    row = np.floor(py / cs).astype(int)
    oob = (col < 0) | (col >= w) | (row < 0) | (row >= h)
    hit = oob | plan.cells[np.clip(row, 0, h - 1), np.clip(col, 0, w - 1)]
    hit &= seg_len > 1e-12  # zero-length segments at corner crossings carry no area
    first = hit.argmax(axis=1)
    any_hit = hit.any(axis=1)
    dist = np.where(any_hit, t[np.arange(NUM_RAYS), first], MAX_SCAN_RANGE)
    return np.minimum(dist, MAX_SCAN_RANGE)


def observe(plan: FloorPlan, pose: Pose) -> np.ndarray:
    """120-ray panoramic depth scan at the pose, indexed by absolute world
    angle (3 deg per ray), so the scan is independent of heading."""
    if not plan.is_free(pose.x, pose.y):
        raise PoseInObstacleError(f"pose ({pose.x:.3f}, {pose.y:.3f}) is inside an obstacle")
    key = (round(pose.x, 9), round(pose.y, 9))
    cached = plan._scan_cache.get(key)
    if cached is None:
        cached = _raycast_all(plan, pose.x, pose.y)
        cached.setflags(write=False)
        plan._scan_cache[key] = cached
    return cached


# ---------------------------------------------------------------------------
# geodesics

class _GridGraph:
    """8-connected free-cell graph with scipy Dijkstra behind it."""

    def __init__(self, plan: FloorPlan):
        h, w = plan.shape
        free = ~plan.cells
        idx = -np.ones((h, w), dtype=np.int64)
        self.free_rc = np.argwhere(free)
        idx[free] = np.arange(len(self.free_rc))
        self.idx = idx
        cs = plan.cell_size
        srcs, dsts, wts = [], [], []
        for dr, dc, cost in [(0, 1, cs), (1, 0, cs), (1, 1, cs * math.sqrt(2)), (1, -1, cs * math.sqrt(2))]:
            a = free[max(0, -dr):h - max(0, dr), max(0, -dc):w - max(0, dc)]
            b = free[max(0, dr):h - max(0, -dr), max(0, dc):w - max(0, -dc)]
            both = a & b
            rr, cc = np.nonzero(both)
            rr = rr + max(0, -dr)
            cc = cc + max(0, -dc)
            srcs.append(idx[rr, cc])
            dsts.append(idx[rr + dr, cc + dc])
            wts.append(np.full(len(rr), cost))
        src = np.concatenate(srcs + dsts)
        dst = np.concatenate(dsts + srcs)
        wt = np.concatenate(wts + wts)
        n = len(self.free_rc)
        self.mat = csr_matrix((wt, (src, dst)), shape=(n, n))
        self.n = n
        _, labels = connected_components(self.mat, directed=False)
        self.labels = labels

    def field(self, plan: FloorPlan, row: int, col: int) -> np.ndarray:
        """Geodesic distance (meters) from a source cell to every cell."""
        i = self.idx[row, col]
        out = np.full(plan.shape, np.inf)
        if i < 0:
            return out
        d = dijkstra(self.mat, directed=False, indices=i)
        out[self.free_rc[:, 0], self.free_rc[:, 1]] = d
        return out


def _grid_graph(plan: FloorPlan) -> _GridGraph:
    if plan._graph_cache is None:
        plan._graph_cache = _GridGraph(plan)
    return plan._graph_cache


def distance_field(plan: FloorPlan, source) -> np.ndarray:
    """Cached geodesic distance field from the cell containing `source`."""
    x, y = float(source[0]), float(source[1])
    r, c = plan.cell_of(x, y)
    key = (r, c)
    f = plan._field_cache.get(key)
    if f is None:
        f = _grid_graph(plan).field(plan, r, c)
        f.setflags(write=False)
        plan._field_cache[key] = f
    return f


def geodesic_distance(plan: FloorPlan, a, b) -> float:
    """8-connected shortest-path length between the cells holding a and b.

    Returns math.inf when the two points are in different free components
    (or either lies in an obstacle).
    """
    f = distance_field(plan, a)
    r, c = plan.cell_of(float(b[0]), float(b[1]))
    if not (0 <= r < plan.shape[0] and 0 <= c < plan.shape[1]):
        return UNREACHABLE
    return float(f[r, c])


class GeodesicOracle:
    """Ground-truth distance-to-goal lookups for one episode.

    Positions are in the episode frame (start at the origin); the oracle
    shifts them back into world coordinates before consulting the grid.
    """

    def __init__(self, plan: FloorPlan, goal_world, origin_world=(0.0, 0.0)):
        self.plan = plan
        self.goal = (float(goal_world[0]), float(goal_world[1]))
        self.origin = (float(origin_world[0]), float(origin_world[1]))
        self._field = distance_field(plan, self.goal)

    def to_goal(self, pos_episode) -> float:
        x = pos_episode[0] + self.origin[0]
        y = pos_episode[1] + self.origin[1]
        r, c = self.plan.cell_of(x, y)
        h, w = self.plan.shape
        if not (0 <= r < h and 0 <= c < w):
            return UNREACHABLE
        return float(self._field[r, c])

    def to_goal_many(self, positions) -> np.ndarray:
        pos = np.asarray(positions, dtype=float)
        cs = self.plan.cell_size
        c = np.floor((pos[:, 0] + self.origin[0]) / cs).astype(int)
        r = np.floor((pos[:, 1] + self.origin[1]) / cs).astype(int)
        h, w = self.plan.shape
        inside = (r >= 0) & (r < h) & (c >= 0) & (c < w)
        out = np.full(len(pos), UNREACHABLE)
        out[inside] = self._field[r[inside], c[inside]]
        return out


# ---------------------------------------------------------------------------
# episodes

@dataclass(frozen=True)
class EpisodeSpec:
    plan_ref: str
    start: Pose
    goal: tuple  # (x, y) meters, world frame
    geodesic_ref: float
    episode_id: str


def sample_episode(plan: FloorPlan, seed: int, min_geodesic: float = 3.0,
                   max_geodesic: float = 30.0, max_attempts: int = 1000) -> EpisodeSpec:
    """Rejection-sample a start pose and goal in the largest free component
    with a nontrivial, bounded ground-truth path length."""
    rng = np.random.default_rng([plan.seed & 0x7FFFFFFF, seed])
    gg = _grid_graph(plan)
    # restrict to the largest free component
    counts = np.bincount(gg.labels)
    main = counts.argmax()
    cells = gg.free_rc[gg.labels == main]
    if len(cells) < 100:
        raise SamplingError("largest free component is too small")

    attempts = 0
    while attempts < max_attempts:
        sr, sc = cells[rng.integers(len(cells))]
        f = distance_field(plan, plan.cell_center(sr, sc))
        for _ in range(200):
            attempts += 1
            gr, gc = cells[rng.integers(len(cells))]
            d = f[gr, gc]
            if min_geodesic <= d <= max_geodesic:
                sx, sy = plan.cell_center(sr, sc)
                gx, gy = plan.cell_center(gr, gc)
                heading = float(rng.integers(24)) * TURN_DEG
                return EpisodeSpec(
                    plan_ref=f"plan-{plan.seed}",
                    start=Pose(sx, sy, heading),
                    goal=(gx, gy),
                    geodesic_ref=float(d),
                    episode_id=f"plan{plan.seed}-ep{seed}",
                )
            if attempts >= max_attempts:
                break
    raise SamplingError(f"no valid episode after {max_attempts} attempts")


# ---------------------------------------------------------------------------
# serialization

def plan_to_json(plan: FloorPlan, episodes: list[EpisodeSpec] | None = None) -> str:
    h, w = plan.shape
    doc = {
        "version": 1,
        "cell_size": plan.cell_size,
        "width": w,
        "height": h,
        "occupancy": "".join("1" if v else "0" for v in plan.cells.ravel()),
        "seed": plan.seed,
        "rooms": [list(r) for r in plan.rooms],
        "episodes": [
            {
                "plan_ref": e.plan_ref,
                "start": {"x": e.start.x, "y": e.start.y, "heading": e.start.heading},
                "goal": [e.goal[0], e.goal[1]],
                "geodesic_ref": e.geodesic_ref,
                "episode_id": e.episode_id,
            }
            for e in (episodes or [])
        ],
    }
    return json.dumps(doc)


def plan_from_json(text: str):
    doc = json.loads(text)
    if doc.get("version") != 1:
        raise ValueError(f"unsupported plan document version {doc.get('version')!r}")
    h, w = doc["height"], doc["width"]
    bits = np.frombuffer(doc["occupancy"].encode("ascii"), dtype=np.uint8) - ord("0")
    cells = bits.astype(bool).reshape(h, w)
    plan = FloorPlan(cells=cells, cell_size=doc["cell_size"], seed=doc.get("seed", -1),
                     rooms=[tuple(r) for r in doc.get("rooms", [])])
    episodes = [
        EpisodeSpec(
            plan_ref=e["plan_ref"],
            start=Pose(e["start"]["x"], e["start"]["y"], e["start"]["heading"]),
            goal=(e["goal"][0], e["goal"][1]),
            geodesic_ref=e["geodesic_ref"],
            episode_id=e["episode_id"],
        )
        for e in doc.get("episodes", [])
    ]
    return plan, episodes
