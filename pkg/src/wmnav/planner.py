"""Tree-search planning over imagined graph states.

Each search node is a world state: a graph snapshot plus the set of waypoints
already committed to in the simulated future. Iterations run the classic
select / expand / rollout / back-up cycle; edge and node statistics follow
the visit-weighted update rules exactly (checked after every iteration), and
the final answer is extracted by a max-backup sweep over the explored tree,
which on a fully saturated tree reproduces exhaustive search values.

The planner itself is generic over a small problem interface so it can be
exercised on toy state spaces with known optimal values; the navigation
problem binds it to the world model and a distance estimator.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import worldmodel as wm
from .distfn import Estimator

STOP_REWARD = 5.0
STOP_DISTANCE_M = 3.0


class DeadEndError(RuntimeError):
    """Planning requested from a state with no actions."""


class InvariantError(AssertionError):
    """A search-tree bookkeeping identity failed."""


@dataclass
class PlannerConfig:
    iterations: int = 50
    horizon: int = 4
    exploration: float = 1.0    # UCT constant C
    discount: float = 0.98
    temperature: float = 1.0    # rollout softmax sharpness, meters
    check_invariants: bool = True

    def __post_init__(self):
        if self.iterations < 0 or self.horizon < 0 or self.exploration < 0:
            raise ValueError("iterations, horizon and exploration must be nonnegative")
        if not (0.0 < self.discount <= 1.0):
            raise ValueError("discount must be in (0, 1]")


def uct(q: float, n_s: int, n_sa: int, c: float) -> float:
    """Upper confidence bound for a tree edge; unexpanded edges score +inf."""
    if n_sa == 0:
        return math.inf
    return q + c * math.sqrt(math.log(n_s) / n_sa)


def leaf_value(rewards, discount: float) -> float:
    """Discounted sum of a rollout reward sequence."""
    return float(sum(r * discount ** k for k, r in enumerate(rewards)))


# ---------------------------------------------------------------------------
# world states and the navigation problem

@dataclass
class WorldState:
    graph: wm.EnvGraph
    visited_ids: frozenset
    depth: int = 0
    terminal: bool = False
    _estimates: np.ndarray | None = None


class NavigationProblem:
    """Binds the planner to a synthesizer, estimator and goal.

    Actions are ("move", node_id) for detected-but-unvisited waypoints and
    ("stop", node_id) for waypoints already visited in the state, both in
    node-id order.
    """

    def __init__(self, synthesizer, estimator: Estimator, goal, oracle, rng):
        self.synth = synthesizer
        self.estimator = estimator
        self.goal = goal
        self.oracle = oracle
        self.rng = rng

    def estimates(self, state: WorldState) -> np.ndarray:
        if state._estimates is None:
            state._estimates = self.estimator.estimate_all(
                state.graph, self.goal, self.oracle, self.rng)
        return state._estimates

    def dist_to_goal(self, state: WorldState) -> float:
        ests = self.estimates(state)
        return float(min(ests[i] for i in state.visited_ids))

    def actions(self, state: WorldState) -> list:
        moves = [("move", i) for i in state.graph.ids()
                 if i not in state.visited_ids
                 and state.graph.status(i) in (wm.Status.FRONTIER, wm.Status.IMAGINED)]
        stops = [("stop", i) for i in sorted(state.visited_ids)]
        return moves + stops

    def is_terminal(self, state: WorldState) -> bool:
        return state.terminal

    def transition(self, state: WorldState, action):
        """Deterministic successor plus the immediate reward."""
        kind, node_id = action
        if kind == "stop":
            child = WorldState(graph=state.graph, visited_ids=state.visited_ids,
                               depth=state.depth + 1, terminal=True)
            fd = float(self.estimates(state)[node_id])
            reward = STOP_REWARD if fd <= STOP_DISTANCE_M else -STOP_REWARD
            return child, reward
        g = state.graph.copy()
        wm.imagined_expand(g, node_id, self.synth, status=wm.Status.IMAGINED)
        child = WorldState(graph=g, visited_ids=state.visited_ids | {node_id},
                           depth=state.depth + 1)
        reward = self.dist_to_goal(state) - self.dist_to_goal(child)
        return child, reward

    def action_score(self, state: WorldState, action) -> float:
        """Estimated distance of the action's target waypoint (rollout policy)."""
        return float(self.estimates(state)[action[1]])


def reward(state: WorldState, action, next_state: WorldState | None,
           problem: NavigationProblem) -> float:
    """Immediate reward: +-STOP_REWARD for stops by the 3 m test, and the
    decrease in estimated distance-to-goal for moves."""
    kind, node_id = action
    if kind == "stop":
        fd = float(problem.estimates(state)[action[1]])
        return STOP_REWARD if fd <= STOP_DISTANCE_M else -STOP_REWARD
    if next_state is None:
        raise ValueError("move rewards need the successor state")
    return problem.dist_to_goal(state) - problem.dist_to_goal(next_state)


def rollout_probabilities(scores, temperature: float) -> np.ndarray:
    """Softmax over negated distance scores: nearer waypoints are likelier."""
    s = -np.asarray(scores, dtype=float) / temperature
    s -= s.max()
    e = np.exp(s)
    return e / e.sum()


# ---------------------------------------------------------------------------
# search tree

@dataclass
class _Edge:
    action: object
    n: int = 0
    q: float = 0.0
    reward: float = 0.0
    child: int | None = None


@dataclass
class _Node:
    state: object
    depth: int
    n: int = 1
    v: float = 0.0
    terminal: bool = False
    edges: list = field(default_factory=list)
    parent: tuple | None = None   # (parent node id, edge index)


class SearchTree:
    def __init__(self):
        self.nodes: list[_Node] = []

    def add_node(self, state, depth, terminal, actions) -> int:
        node = _Node(state=state, depth=depth, terminal=terminal,
                     edges=[_Edge(action=a) for a in actions])
        self.nodes.append(node)
        return len(self.nodes) - 1

    def node(self, i: int) -> _Node:
        return self.nodes[i]

    def check_identities(self, ids=None, tol: float = 1e-9):
        """Visit-count and value identities for every internal node."""
        for i in ids if ids is not None else range(len(self.nodes)):
            node = self.nodes[i]
            expanded = [e for e in node.edges if e.child is not None]
            if not expanded:
                continue
            n_sum = sum(e.n for e in expanded)
            if node.n != 1 + n_sum:
                raise InvariantError(f"node {i}: N={node.n} != 1 + {n_sum}")
            weighted = sum(e.n * e.q for e in expanded)
            if abs(node.v * node.n - weighted) > tol * max(1.0, abs(weighted)):
                raise InvariantError(f"node {i}: V={node.v} != {weighted}/{node.n}")


@dataclass
class PlanResult:
    action: object
    root_values: dict          # action -> max-backup value over the explored tree
    tree: SearchTree
    iterations: int
    invariant_checks: int = 0


def _select(tree: SearchTree, problem, cfg: PlannerConfig):
    """Descend by UCT until an unexpanded edge or a terminal/horizon state."""
    path = []
    nid = 0
    while True:
        node = tree.node(nid)
        if node.terminal or node.depth >= cfg.horizon or not node.edges:
            return path, nid, None
        best_i, best_u = 0, -math.inf
        for i, e in enumerate(node.edges):
            u = uct(e.q, node.n, e.n, cfg.exploration)
            if u > best_u:
                best_i, best_u = i, u
        path.append((nid, best_i))
        edge = node.edges[best_i]
        if edge.child is None:
            return path, nid, best_i
        nid = edge.child


def _expand(tree: SearchTree, problem, nid: int, edge_i: int) -> int:
    node = tree.node(nid)
    edge = node.edges[edge_i]
    if edge.child is not None:
        raise ValueError("edge already expanded")
    child_state, r = problem.transition(node.state, edge.action)
    terminal = problem.is_terminal(child_state)
    actions = [] if terminal else problem.actions(child_state)
    cid = tree.add_node(child_state, node.depth + 1, terminal or not actions, actions)
    tree.node(cid).parent = (nid, edge_i)
    edge.child = cid
    edge.reward = r
    return cid


def _first_unexpanded(tree: SearchTree, cfg: PlannerConfig):
    """Oldest node below the horizon that still has an unexpanded edge."""
    for nid, node in enumerate(tree.nodes):
        if node.terminal or node.depth >= cfg.horizon:
            continue
        for ei, e in enumerate(node.edges):
            if e.child is None:
                return nid, ei
    return None


def _path_to(tree: SearchTree, nid: int):
    path = []
    while tree.node(nid).parent is not None:
        pid, ei = tree.node(nid).parent
        path.append((pid, ei))
        nid = pid
    path.reverse()
    return path


def _rollout(tree: SearchTree, problem, cfg: PlannerConfig, leaf_id: int, rng) -> list:
    node = tree.node(leaf_id)
    if node.terminal:
        return []
    steps = cfg.horizon - node.depth
    state = node.state
    rewards = []
    for _ in range(steps):
        if problem.is_terminal(state):
            break
        actions = problem.actions(state)
        if not actions:
            break
        scores = [problem.action_score(state, a) for a in actions]
        probs = rollout_probabilities(scores, cfg.temperature)
        a = actions[int(rng.choice(len(actions), p=probs))]
        state, r = problem.transition(state, a)
        rewards.append(r)
    return rewards


def _backup(tree: SearchTree, path, leaf_id: int, cfg: PlannerConfig):
    """Bottom-up statistics update along the path (leaf value already set)."""
    for nid, ei in reversed(path):
        node = tree.node(nid)
        edge = node.edges[ei]
        child = tree.node(edge.child)
        edge.n = child.n
        edge.q = edge.reward + cfg.discount * child.v
        node.n = 1 + sum(e.n for e in node.edges if e.child is not None)
        node.v = sum(e.n * e.q for e in node.edges if e.child is not None) / node.n


def _max_backup(tree: SearchTree, cfg: PlannerConfig, nid: int) -> float:
    node = tree.node(nid)
    expanded = [e for e in node.edges if e.child is not None]
    if node.terminal or not expanded:
        return node.v
    return max(e.reward + cfg.discount * _max_backup(tree, cfg, e.child)
               for e in expanded)


def plan(root_state, problem, cfg: PlannerConfig, rng: np.random.Generator) -> PlanResult:
    """Full planning call: iterations of search, then answer extraction.

    The returned action maximises the max-backup value of the explored tree
    among root edges that were visited at least once; ties break toward the
    lower action index.
    """
    root_actions = problem.actions(root_state)
    if not root_actions:
        raise DeadEndError("no actions available at the planning root")
    tree = SearchTree()
    tree.add_node(root_state, 0, problem.is_terminal(root_state), root_actions)
    checks = 0

    def expand_and_backup(path, nid, edge_i):
        leaf_id = _expand(tree, problem, nid, edge_i)
        rewards = _rollout(tree, problem, cfg, leaf_id, rng)
        tree.node(leaf_id).v = leaf_value(rewards, cfg.discount)
        _backup(tree, path, leaf_id, cfg)
        return leaf_id

    for _ in range(cfg.iterations):
        path, nid, edge_i = _select(tree, problem, cfg)
        if edge_i is not None:
            leaf_id = expand_and_backup(path, nid, edge_i)
        else:
            # the walk ended on an already-explored terminal or horizon state:
            # absorb the visit, then put the iteration to work on the first
            # unexpanded edge so a budget of at least the tree size saturates
            leaf_id = nid
            tree.node(leaf_id).n += 1
            _backup(tree, path, leaf_id, cfg)
            redirect = _first_unexpanded(tree, cfg)
            if redirect is not None:
                r_nid, r_edge = redirect
                r_path = _path_to(tree, r_nid) + [(r_nid, r_edge)]
                leaf_id = expand_and_backup(r_path, r_nid, r_edge)
        if cfg.check_invariants:
            tree.check_identities(ids=[p for p, _ in path] + [leaf_id])
            checks += 1

    root = tree.node(0)
    values = {}
    for i, e in enumerate(root.edges):
        if e.child is not None and e.n > 0:
            values[e.action] = e.reward + cfg.discount * _max_backup(tree, cfg, e.child)
    if not values:
        raise DeadEndError("no root edge was expanded")
    # value ties (e.g. several stop targets inside the success radius) break
    # toward the action with the smallest estimated distance, then the index
    best = min(((a, v) for a, v in values.items()),
               key=lambda av: (-av[1], problem.action_score(root_state, av[0]),
                               root_actions.index(av[0])))[0]
    return PlanResult(action=best, root_values=values, tree=tree,
                      iterations=cfg.iterations, invariant_checks=checks)


# ---------------------------------------------------------------------------
# tree export (graph-description text for visualisation)

def export_tree_text(tree: SearchTree, cfg_discount: float = 0.98) -> str:
    """DOT text with node values and edge statistics.

    Colors are the value normalised to [0, 1] across the tree (max -> 1.0);
    a degenerate range maps everything to 1.0.
    """
    vs = [n.v for n in tree.nodes]
    vmin, vmax = min(vs), max(vs)
    qs = [e.q for n in tree.nodes for e in n.edges if e.child is not None]
    qmin, qmax = (min(qs), max(qs)) if qs else (0.0, 0.0)

    def norm(x, lo, hi):
        return 1.0 if hi - lo < 1e-12 else (x - lo) / (hi - lo)

    lines = ["digraph search {",
             f'  // color scale: value normalised to [0,1], min={vmin:.6f} max={vmax:.6f}']
    for i, n in enumerate(tree.nodes):
        lines.append(f'  s{i} [v={n.v:.9f}, n={n.n}, depth={n.depth}, '
                     f'color={norm(n.v, vmin, vmax):.6f}];')
    for i, n in enumerate(tree.nodes):
        for e in n.edges:
            if e.child is not None:
                lines.append(f'  s{i} -> s{e.child} [q={e.q:.9f}, n={e.n}, '
                             f'color={norm(e.q, qmin, qmax):.6f}, label="{e.action}"];')
    lines.append("}")
    return "\n".join(lines)


def parse_tree_text(text: str):
    """Parse the exported format back into node/edge attribute dicts."""
    import re
    nodes, edges = {}, {}
    node_re = re.compile(r"^\s*s(\d+) \[v=([-\d.e]+), n=(\d+), depth=(\d+), color=([\d.]+)\];")
    edge_re = re.compile(r"^\s*s(\d+) -> s(\d+) \[q=([-\d.e]+), n=(\d+), color=([\d.]+)")
    for line in text.splitlines():
        m = node_re.match(line)
        if m:
            nodes[int(m.group(1))] = {"v": float(m.group(2)), "n": int(m.group(3)),
                                      "depth": int(m.group(4)), "color": float(m.group(5))}
            continue
        m = edge_re.match(line)
        if m:
            edges[(int(m.group(1)), int(m.group(2)))] = {
                "q": float(m.group(3)), "n": int(m.group(4)), "color": float(m.group(5))}
    return nodes, edges
