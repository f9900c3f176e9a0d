"""Episode control loop: plan over the graph, execute waypoints with
low-level actions, fold real observations back into the graph, repeat.

The graph lives in the episode frame (start at the origin); this module owns
the translation to world coordinates and all low-level motion.
"""

from __future__ import annotations

import heapq
import math
import time
import zlib
from dataclasses import dataclass, field

import numpy as np

from . import worldmodel as wm
from .distfn import Estimator, EstimatorSpec, GatParams
from .env import (Action, EpisodeSpec, FloorPlan, GeodesicOracle, NUM_RAYS, Pose,
                  observe, step)
from .planner import (DeadEndError, NavigationProblem, PlannerConfig, WorldState,
                      export_tree_text, plan)
from .worldmodel import Status, SynthesizerSpec

AIM_TOLERANCE_DEG = 7.5
REACH_TOLERANCE_M = 0.25


@dataclass
class EpisodeConfig:
    planner: PlannerConfig = field(default_factory=PlannerConfig)
    synthesizer: SynthesizerSpec = field(default_factory=SynthesizerSpec)
    estimator: EstimatorSpec = field(default_factory=EstimatorSpec)
    seed: int = 0
    max_low_level_steps: int = 500
    success_radius: float = 3.0
    max_rounds: int = 50          # planning decisions, not low-level steps
    record_trees: bool = False
    params: GatParams | None = None   # trained weights for learned estimators


@dataclass
class Trajectory:
    poses: list
    actions: list


@dataclass
class Decision:
    round: int
    action: tuple
    tree_text: str | None = None


@dataclass
class EpisodeResult:
    spec: EpisodeSpec
    trajectory: Trajectory
    decisions: list
    outcome: str                  # stopped | dead_end | budget_exhausted | round_limit
    stopped: bool
    plan_calls: int
    plan_seconds: float
    invariant_checks: int = 0     # tree-identity verifications that all passed

    def final_pose(self) -> Pose:
        return self.trajectory.poses[-1]


def navigate_to(plan_: FloorPlan, pose: Pose, target, budget: int):
    """Greedy low-level controller toward a nearby target position.

    Rotates in 15 degree steps until aimed within 7.5 degrees, then steps
    forward, re-aiming after every action (so slides self-correct). Stops
    within 0.25 m of the target, when fully blocked, or when the budget runs
    out. Returns (poses_after_each_action, actions, final_pose).
    """
    poses, actions = [], []
    for _ in range(budget):
        dx, dy = target[0] - pose.x, target[1] - pose.y
        if math.hypot(dx, dy) < REACH_TOLERANCE_M:
            break
        bearing = math.degrees(math.atan2(dy, dx))
        err = (bearing - pose.heading + 180.0) % 360.0 - 180.0
        if abs(err) > AIM_TOLERANCE_DEG:
            action = Action.TURN_LEFT if err > 0 else Action.TURN_RIGHT
        else:
            action = Action.FORWARD
        new_pose = step(plan_, pose, action)
        poses.append(new_pose)
        actions.append(action)
        if action is Action.FORWARD and new_pose == pose:
            break  # fully blocked: best effort, let the caller replan
        pose = new_pose
    return poses, actions, pose


def _graph_path(g: wm.EnvGraph, src: int, dst: int) -> list:
    """Shortest node path over graph edges by Euclidean length."""
    if src == dst:
        return [src]
    pos = g.positions()
    dist = {src: 0.0}
    prev = {}
    heap = [(0.0, src)]
    while heap:
        d, u = heapq.heappop(heap)
        if u == dst:
            break
        if d > dist.get(u, math.inf):
            continue
        for v in g.neighbors(u):
            v = int(v)
            w = float(np.hypot(*(pos[v] - pos[u])))
            nd = d + w
            if nd < dist.get(v, math.inf) - 1e-12:
                dist[v] = nd
                prev[v] = u
                heapq.heappush(heap, (nd, v))
    if dst not in prev and dst != src:
        return [src, dst]  # disconnected should not happen; fall back to direct
    path = [dst]
    while path[-1] != src:
        path.append(prev[path[-1]])
    return path[::-1]


def _episode_rngs(cfg: EpisodeConfig, plan_: FloorPlan, spec: EpisodeSpec):
    tag = zlib.crc32(spec.episode_id.encode())
    ss = np.random.SeedSequence([cfg.seed, plan_.seed & 0x7FFFFFFF, tag])
    synth_ss, est_ss, roll_ss = ss.spawn(3)
    return synth_ss, np.random.default_rng(est_ss), np.random.default_rng(roll_ss)


def run_episode(plan_: FloorPlan, spec: EpisodeSpec, cfg: EpisodeConfig) -> EpisodeResult:
    """One full navigation episode. Deterministic for fixed inputs and seed."""
    origin = (spec.start.x, spec.start.y)

    def observe_eg(pos_eg):
        # ground-truth consultation for the synthesizers; a degraded world
        # model may propose positions inside obstacles, which "look like" a
        # zero scan rather than being an error
        x, y = pos_eg[0] + origin[0], pos_eg[1] + origin[1]
        if not plan_.is_free(x, y):
            return np.zeros(NUM_RAYS)
        return observe(plan_, Pose(x, y))

    synth_ss, rng_est, rng_roll = _episode_rngs(cfg, plan_, spec)
    synth = cfg.synthesizer.build(observe_eg, seed=synth_ss)
    estimator = cfg.estimator.build(cfg.params)
    oracle = GeodesicOracle(plan_, spec.goal, origin_world=origin)
    goal_eg = (spec.goal[0] - origin[0], spec.goal[1] - origin[1])

    pose = spec.start
    start_scan = observe(plan_, pose)
    g = wm.init_graph(start_scan)
    synth.remember((0.0, 0.0), start_scan)
    current = 0
    budget = cfg.max_low_level_steps
    poses, actions = [pose], []
    decisions = []
    outcome, stopped = "round_limit", False
    plan_calls, plan_seconds = 0, 0.0
    invariant_checks = 0
    greedy = cfg.planner.iterations == 0 or cfg.planner.horizon == 0

    for rnd in range(cfg.max_rounds):
        wm.imagined_expand(g, current, synth, status=Status.FRONTIER)
        visited = frozenset(g.visited_ids())
        root = WorldState(graph=g.copy(), visited_ids=visited, depth=0)
        problem = NavigationProblem(synth, estimator, goal_eg, oracle, rng_est)
        root_actions = problem.actions(root)
        if not root_actions:
            outcome = "dead_end"
            break

        t0 = time.perf_counter()
        tree_text = None
        if greedy:
            action = _greedy_decision(problem, root)
        else:
            try:
                result = plan(root, problem, cfg.planner, rng_roll)
            except DeadEndError:
                outcome = "dead_end"
                break
            action = result.action
            invariant_checks += result.invariant_checks
            if cfg.record_trees:
                tree_text = export_tree_text(result.tree, cfg.planner.discount)
        plan_seconds += time.perf_counter() - t0
        plan_calls += 1
        decisions.append(Decision(round=rnd, action=action, tree_text=tree_text))

        kind, target = action
        node_path = _graph_path(g, current, target)
        reached_all = True
        for hop in node_path[1:]:
            hop_world = (g.positions()[hop][0] + origin[0], g.positions()[hop][1] + origin[1])
            leg_poses, leg_actions, pose = navigate_to(plan_, pose, hop_world, budget)
            poses.extend(leg_poses)
            actions.extend(leg_actions)
            budget -= len(leg_actions)
            pos_eg = (pose.x - origin[0], pose.y - origin[1])
            scan = observe(plan_, pose)
            nid = g.add_node(pos_eg, scan, Status.VISITED, depth=0, from_id=current)
            synth.remember(pos_eg, scan)
            current = nid
            if nid != hop:
                reached_all = False
                break
            if budget <= 0:
                break

        if kind == "stop":
            stopped = True
            outcome = "stopped"
            break
        if budget <= 0:
            outcome = "budget_exhausted"
            break
        if not reached_all:
            continue  # landed somewhere new: replan from there

    return EpisodeResult(spec=spec, trajectory=Trajectory(poses=poses, actions=actions),
                         decisions=decisions, outcome=outcome, stopped=stopped,
                         plan_calls=plan_calls, plan_seconds=plan_seconds,
                         invariant_checks=invariant_checks)


def _greedy_decision(problem: NavigationProblem, root: WorldState):
    """Horizon-0 baseline: stop if a visited node already estimates within
    the success radius, else move to the frontier waypoint with the smallest
    estimated distance."""
    ests = problem.estimates(root)
    visited = sorted(root.visited_ids)
    best_stop = min(visited, key=lambda i: (ests[i], i))
    if ests[best_stop] <= 3.0:
        return ("stop", best_stop)
    moves = [a for a in problem.actions(root) if a[0] == "move"]
    if not moves:
        return ("stop", best_stop)
    return min(moves, key=lambda a: (ests[a[1]], a[1]))


def result_to_json(result: EpisodeResult) -> dict:
    return {
        "episode_id": result.spec.episode_id,
        "plan_ref": result.spec.plan_ref,
        "outcome": result.outcome,
        "stopped": result.stopped,
        "plan_calls": result.plan_calls,
        "plan_seconds": result.plan_seconds,
        "poses": [[p.x, p.y, p.heading] for p in result.trajectory.poses],
        "actions": [a.value for a in result.trajectory.actions],
        "decisions": [
            {"round": d.round, "action": list(d.action), "tree": d.tree_text}
            for d in result.decisions
        ],
    }
