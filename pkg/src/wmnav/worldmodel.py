"""Episodic environment graph and scene synthesis.

The graph lives in the episode frame: the start node sits at (0, 0) and all
later positions are offsets from it. Node ids are insertion indices and the
storage is append-only, which keeps planner snapshots cheap (array copies).

A scene synthesizer predicts the observation at a position the agent has not
visited. Three gradations stand in for a learned generative model: perfect
lookups, noisy lookups whose error grows with synthesis depth, and a lazy
copy of the nearest remembered real scan.
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass, field

import numpy as np

from . import waypoint as wp
from .env import MAX_SCAN_RANGE, NUM_RAYS

MERGE_RADIUS_M = 0.5


class Status(enum.IntEnum):
    VISITED = 0    # physically reached; scan is real (synthesis depth 0)
    FRONTIER = 1   # detected from a visited node, not yet reached
    IMAGINED = 2   # exists only inside a planning snapshot


@dataclass(frozen=True)
class EGNode:
    """Read-only view of one graph node."""

    id: int
    position: tuple
    status: Status
    synthesis_depth: int

    def embedding(self, graph: "EnvGraph") -> np.ndarray:
        return graph.scan(self.id)


class EnvGraph:
    """Append-only waypoint graph with per-node scans and symmetric edges."""

    def __init__(self, cap: int = 8):
        self._pos = np.zeros((cap, 2))
        self._scans = np.zeros((cap, NUM_RAYS))
        self._depth = np.zeros(cap, dtype=np.int32)
        self._status = np.zeros(cap, dtype=np.int8)
        self._expanded = np.zeros(cap, dtype=bool)
        self._edges = np.zeros((2 * cap, 2), dtype=np.int32)
        self.n = 0
        self.m = 0  # directed edge count
        self._edge_set = set()
        self.start_id = 0

    # -- storage ------------------------------------------------------------

    def _grow_nodes(self):
        if self.n == len(self._pos):
            cap = max(8, 2 * len(self._pos))
            for name in ("_pos", "_scans", "_depth", "_status", "_expanded"):
                arr = getattr(self, name)
                bigger = np.zeros((cap,) + arr.shape[1:], dtype=arr.dtype)
                bigger[: self.n] = arr[: self.n]
                setattr(self, name, bigger)

    def _grow_edges(self):
        if self.m == len(self._edges):
            cap = max(16, 2 * len(self._edges))
            bigger = np.zeros((cap, 2), dtype=self._edges.dtype)
            bigger[: self.m] = self._edges[: self.m]
            self._edges = bigger

    def copy(self) -> "EnvGraph":
        g = EnvGraph.__new__(EnvGraph)
        g._pos = self._pos[: self.n].copy()
        g._scans = self._scans[: self.n].copy()
        g._depth = self._depth[: self.n].copy()
        g._status = self._status[: self.n].copy()
        g._expanded = self._expanded[: self.n].copy()
        g._edges = self._edges[: self.m].copy()
        g.n = self.n
        g.m = self.m
        g._edge_set = set(self._edge_set)
        g.start_id = self.start_id
        return g

    # -- queries ------------------------------------------------------------

    def node(self, i: int) -> EGNode:
        if not (0 <= i < self.n):
            raise KeyError(f"no node {i}")
        return EGNode(id=i, position=(float(self._pos[i, 0]), float(self._pos[i, 1])),
                      status=Status(int(self._status[i])),
                      synthesis_depth=int(self._depth[i]))

    def ids(self):
        return range(self.n)

    def positions(self) -> np.ndarray:
        return self._pos[: self.n]

    def scans(self) -> np.ndarray:
        return self._scans[: self.n]

    def scan(self, i: int) -> np.ndarray:
        return self._scans[i]

    def depth(self, i: int) -> int:
        return int(self._depth[i])

    def status(self, i: int) -> Status:
        return Status(int(self._status[i]))

    def statuses(self) -> np.ndarray:
        return self._status[: self.n]

    def edges(self) -> np.ndarray:
        return self._edges[: self.m]

    def has_edge(self, u: int, v: int) -> bool:
        return (u, v) in self._edge_set

    def neighbors(self, i: int):
        e = self.edges()
        return e[e[:, 0] == i, 1]

    def edge_embedding(self, u: int, v: int) -> np.ndarray:
        """(cos, sin, distance) of the travel direction u -> v."""
        if (u, v) not in self._edge_set:
            raise KeyError(f"no edge ({u}, {v})")
        d = self._pos[v] - self._pos[u]
        dist = float(np.hypot(d[0], d[1]))
        return np.array([d[0] / dist, d[1] / dist, dist])

    def visited_ids(self):
        return [int(i) for i in np.nonzero(self._status[: self.n] == Status.VISITED)[0]]

    def was_expanded(self, i: int) -> bool:
        return bool(self._expanded[i])

    # -- mutation -----------------------------------------------------------

    def _add_edge_pair(self, u: int, v: int):
        if u == v or (u, v) in self._edge_set:
            return
        for a, b in ((u, v), (v, u)):
            self._grow_edges()
            self._edges[self.m] = (a, b)
            self.m += 1
            self._edge_set.add((a, b))

    def add_node(self, position, scan: np.ndarray, status: Status, depth: int,
                 from_id: int | None = None) -> int:
        """Insert a node, merging into an existing node within MERGE_RADIUS_M.

        On merge the stored observation is kept unless the incoming one has a
        strictly smaller synthesis depth (reality overrides imagination).
        Edges are created to from_id and to every node with mutual heatmap
        detection.
        """
        if from_id is not None and not (0 <= from_id < self.n):
            raise KeyError(f"unknown from node {from_id}")
        p = np.asarray(position, dtype=float)
        if self.n > 0:
            d = np.hypot(*(self.positions() - p).T)
            nearest = int(d.argmin())
            if d[nearest] <= MERGE_RADIUS_M:
                if depth < self._depth[nearest]:
                    self._scans[nearest] = scan
                    self._depth[nearest] = depth
                    if status == Status.VISITED:
                        # a real observation fixes the node where it was taken,
                        # keeping the stored scan consistent with the position
                        self._pos[nearest] = p
                if status == Status.VISITED:
                    self._status[nearest] = Status.VISITED
                elif status == Status.FRONTIER and self._status[nearest] == Status.IMAGINED:
                    self._status[nearest] = Status.FRONTIER
                if from_id is not None:
                    self._add_edge_pair(from_id, nearest)
                return nearest

        self._grow_nodes()
        i = self.n
        self._pos[i] = p
        self._scans[i] = scan
        self._depth[i] = depth
        self._status[i] = status
        self._expanded[i] = False
        self.n += 1

        if self.n > 1:
            mutual = self._mutual_detection(i)
            if from_id is not None:
                mutual[from_id] = True  # the link the waypoint came from always exists
            for j in np.nonzero(mutual)[0]:
                self._add_edge_pair(int(j), i)
        return i

    def _mutual_detection(self, i: int) -> np.ndarray:
        """others[j] is True when node j and node i each appear navigable in
        the other's heatmap (nearest-bin lookup on the stored scans)."""
        p = self._pos[i]
        rel = self._pos[: self.n] - p
        dist = np.hypot(rel[:, 0], rel[:, 1])
        jbin = np.round(dist / wp.DIST_STEP_M).astype(int) - 1
        ok = (jbin >= 0) & (jbin < wp.DIST_BINS)
        ok[i] = False
        if not ok.any():
            return ok
        need = wp.DIST_STEP_M * (jbin + 1) + wp.CLEARANCE_M
        ang_to_other = np.round((np.degrees(np.arctan2(rel[:, 1], rel[:, 0])) % 360.0)
                                / wp.ANGLE_STEP_DEG).astype(int) % wp.ANGLE_BINS
        ang_back = (ang_to_other + wp.ANGLE_BINS // 2) % wp.ANGLE_BINS
        sees = self._scans[i][ang_to_other] >= need                     # i detects j
        seen = self._scans[np.arange(self.n), ang_back] >= need         # j detects i
        return ok & sees & seen

    def mark_visited(self, i: int, scan: np.ndarray):
        """Replace a node's observation with a real scan (synthesis depth 0)."""
        self._scans[i] = scan
        self._depth[i] = 0
        self._status[i] = Status.VISITED

    def mark_expanded(self, i: int):
        self._expanded[i] = True

    # -- serialization ------------------------------------------------------

    def to_json(self) -> str:
        nodes = [
            {"id": int(i), "position": [float(self._pos[i, 0]), float(self._pos[i, 1])],
             "status": Status(int(self._status[i])).name.lower(),
             "synthesis_depth": int(self._depth[i])}
            for i in range(self.n)
        ]
        edges = []
        for u, v in self.edges():
            emb = self.edge_embedding(int(u), int(v))
            edges.append({"from": int(u), "to": int(v), "embedding": [float(x) for x in emb]})
        return json.dumps({"start_id": self.start_id, "nodes": nodes, "edges": edges})


def init_graph(start_obs: np.ndarray) -> EnvGraph:
    """A fresh episodic graph holding only the start node at the origin."""
    g = EnvGraph()
    g.add_node((0.0, 0.0), start_obs, Status.VISITED, depth=0)
    return g


def add_waypoint(g: EnvGraph, from_id: int, waypoint: wp.Waypoint, obs: np.ndarray,
                 status: Status, synthesis_depth: int | None = None) -> int:
    """Insert a predicted waypoint with its (possibly synthesized) scan."""
    if not (0 <= from_id < g.n):
        raise KeyError(f"unknown from node {from_id}")
    if synthesis_depth is None:
        synthesis_depth = 0 if status == Status.VISITED else g.depth(from_id) + 1
    return g.add_node(waypoint.position, obs, status, synthesis_depth, from_id=from_id)


# ---------------------------------------------------------------------------
# scene synthesis

class SynthKind(enum.Enum):
    PERFECT = "perfect"
    NOISY = "noisy"
    COPY_MEMORY = "copy_memory"


@dataclass(frozen=True)
class SynthesizerSpec:
    kind: SynthKind = SynthKind.PERFECT
    sigma0: float = 0.1

    def build(self, observe_fn, seed=0) -> "SceneSynthesizer":
        return SceneSynthesizer(self.kind, observe_fn, sigma0=self.sigma0, seed=seed)

    def label(self) -> str:
        if self.kind == SynthKind.NOISY:
            return f"noisy({self.sigma0:g})"
        return self.kind.value


class SceneSynthesizer:
    """Predicts the scan at a nearby unvisited position.

    perfect      ground truth from the plan oracle
    noisy        ground truth plus N(0, (sigma0 * depth)^2) per ray
    copy_memory  the stored scan of the nearest remembered real observation
    """

    def __init__(self, kind: SynthKind, observe_fn, sigma0: float = 0.1, seed: int = 0):
        self.kind = kind
        self.sigma0 = sigma0
        self._observe = observe_fn
        self._rng = np.random.default_rng(seed)
        self._mem_pos: list[tuple] = []
        self._mem_scan: list[np.ndarray] = []

    def remember(self, position, scan: np.ndarray):
        """Record a real (depth-0) observation for copy-memory synthesis."""
        self._mem_pos.append((float(position[0]), float(position[1])))
        self._mem_scan.append(scan)

    def synthesize(self, from_node: EGNode, target_pos, graph: EnvGraph | None = None):
        """Returns (scan, synthesis_depth) for the target position."""
        dx = target_pos[0] - from_node.position[0]
        dy = target_pos[1] - from_node.position[1]
        if math.hypot(dx, dy) > wp.MAX_WAYPOINT_RANGE + 1e-9:
            raise ValueError(f"target {math.hypot(dx, dy):.2f} m away exceeds the "
                             f"{wp.MAX_WAYPOINT_RANGE} m waypoint range")
        depth = from_node.synthesis_depth + 1
        if self.kind == SynthKind.PERFECT:
            return self._observe(target_pos), depth
        if self.kind == SynthKind.NOISY:
            truth = self._observe(target_pos)
            noise = self._rng.normal(0.0, self.sigma0 * depth, size=NUM_RAYS)
            return np.clip(truth + noise, 0.0, MAX_SCAN_RANGE), depth
        if not self._mem_pos:
            raise RuntimeError("copy-memory synthesizer has no remembered observations")
        pos = np.asarray(self._mem_pos)
        d = np.hypot(pos[:, 0] - target_pos[0], pos[:, 1] - target_pos[1])
        return self._mem_scan[int(d.argmin())].copy(), depth


def imagined_expand(g: EnvGraph, node_id: int, synthesizer: SceneSynthesizer,
                    status: Status = Status.IMAGINED) -> list[int]:
    """Predict waypoints from a node's stored scan and insert them with
    synthesized observations. Idempotent per node."""
    node = g.node(node_id)
    if g.was_expanded(node_id):
        return []
    g.mark_expanded(node_id)
    heatmap = wp.predict_heatmap(g.scan(node_id))
    created = []
    for cand in wp.select_waypoints(heatmap, node.position):
        scan, depth = synthesizer.synthesize(node, cand.position, g)
        before = g.n
        i = add_waypoint(g, node_id, cand, scan, status, synthesis_depth=depth)
        if g.n > before:
            created.append(i)
    return created
