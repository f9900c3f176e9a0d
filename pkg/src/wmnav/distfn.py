"""Distance-to-goal estimation over the environment graph.

The learned estimator is a single graph-attention layer (4 heads, edge
features appended to each neighbor message) followed by a small MLP with a
scaled-softplus output head. Forward and backward passes are written
directly in numpy so the gradients can be validated against finite
differences; smooth activations (tanh, softplus) are used throughout so the
comparison is exact to discretisation error.

Oracle, noisy-oracle and mixture estimators back the ablations of planning
quality against distance-estimation quality.
"""

from __future__ import annotations

import base64
import enum
import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit

from . import waypoint as wp
from .env import (MAX_SCAN_RANGE, GeodesicOracle, Pose, observe)
from .worldmodel import EnvGraph, SceneSynthesizer, Status, SynthesizerSpec, init_graph

FEAT_IN = 122          # 120 normalised rays + 2-vector goal displacement
HEADS = 4
HEAD_DIM = 32          # per-head width, concatenated across heads
MSG_DIM = HEAD_DIM + 3      # projected neighbor + (cos, sin, dist) edge feature
CONCAT_DIM = HEADS * MSG_DIM
MLP_HIDDEN = 64
OUT_SCALE = 50.0            # meters; softplus output is scaled into this range
GOAL_SCALE = 10.0           # meters; goal displacement feature normalisation
MAX_DISTANCE = 100.0        # sentinel for unreachable nodes


class DivergenceError(RuntimeError):
    """Training loss became non-finite."""


# ---------------------------------------------------------------------------
# parameters

@dataclass
class GatParams:
    W: np.ndarray       # (HEADS, HEAD_DIM, FEAT_IN) per-head node projection
    a_dst: np.ndarray   # (HEADS, HEAD_DIM) attention weights on the attending node
    a_src: np.ndarray   # (HEADS, HEAD_DIM) attention weights on the neighbor
    a_e: np.ndarray     # (HEADS, 3) attention weights on the edge feature
    W1: np.ndarray      # (MLP_HIDDEN, CONCAT_DIM)
    b1: np.ndarray      # (MLP_HIDDEN,)
    w2: np.ndarray      # (MLP_HIDDEN,)
    b2: float
    out_scale: float = OUT_SCALE

    def arrays(self) -> dict:
        return {"W": self.W, "a_dst": self.a_dst, "a_src": self.a_src, "a_e": self.a_e,
                "W1": self.W1, "b1": self.b1, "w2": self.w2,
                "b2": np.asarray(self.b2, dtype=float).reshape(1)}

    def copy(self) -> "GatParams":
        return GatParams(self.W.copy(), self.a_dst.copy(), self.a_src.copy(),
                         self.a_e.copy(), self.W1.copy(), self.b1.copy(),
                         self.w2.copy(), float(self.b2), self.out_scale)


def init_params(seed: int = 0, out_bias: float = 0.0, out_scale: float = OUT_SCALE) -> GatParams:
    rng = np.random.default_rng(seed)
    return GatParams(
        W=rng.normal(0.0, 1.0 / math.sqrt(FEAT_IN), (HEADS, HEAD_DIM, FEAT_IN)),
        a_dst=rng.normal(0.0, 1.0 / math.sqrt(HEAD_DIM), (HEADS, HEAD_DIM)),
        a_src=rng.normal(0.0, 1.0 / math.sqrt(HEAD_DIM), (HEADS, HEAD_DIM)),
        a_e=rng.normal(0.0, 0.5, (HEADS, 3)),
        W1=rng.normal(0.0, 1.0 / math.sqrt(CONCAT_DIM), (MLP_HIDDEN, CONCAT_DIM)),
        b1=rng.normal(0.0, 0.1, MLP_HIDDEN),
        w2=rng.normal(0.0, 3.0 / math.sqrt(MLP_HIDDEN), MLP_HIDDEN),
        b2=float(out_bias),
        out_scale=out_scale,
    )


def softplus(z):
    return np.logaddexp(0.0, z)


def softplus_inv(y: float) -> float:
    if y <= 0:
        raise ValueError("softplus inverse needs a positive argument")
    return y + math.log1p(-math.exp(-y)) if y > 1e-8 else math.log(math.expm1(y))


# ---------------------------------------------------------------------------
# graph tensors

@dataclass
class GraphTensors:
    """One graph flattened for the network, in canonical node order.

    Nodes are sorted by position (x, then y) so the arithmetic — and hence
    the float output — is independent of node insertion order and labeling.
    Every node carries a self-loop with a zero edge feature; edges are sorted
    by (dst, src) and grouped contiguously per destination.
    """

    x: np.ndarray           # (n, FEAT_IN)
    src: np.ndarray         # (m,)
    dst: np.ndarray         # (m,) sorted, every node present
    efeat: np.ndarray       # (m, 3)
    seg_starts: np.ndarray  # (n,) start offset of each dst segment
    labels: np.ndarray | None = None
    inv_order: np.ndarray | None = None   # canonical row -> original node id


def node_features(scans: np.ndarray, goal) -> np.ndarray:
    n = len(scans)
    x = np.empty((n, FEAT_IN))
    x[:, : wp.ANGLE_BINS] = scans / MAX_SCAN_RANGE
    x[:, wp.ANGLE_BINS] = goal[0] / GOAL_SCALE
    x[:, wp.ANGLE_BINS + 1] = goal[1] / GOAL_SCALE
    return x


def build_tensors(positions: np.ndarray, scans: np.ndarray, edges: np.ndarray,
                  goal, labels: np.ndarray | None = None) -> GraphTensors:
    n = len(positions)
    order = np.lexsort((positions[:, 1], positions[:, 0]))
    rank = np.empty(n, dtype=np.int64)
    rank[order] = np.arange(n)

    if len(edges):
        e_src = rank[edges[:, 0]]
        e_dst = rank[edges[:, 1]]
    else:
        e_src = np.zeros(0, dtype=np.int64)
        e_dst = np.zeros(0, dtype=np.int64)
    loops = np.arange(n, dtype=np.int64)
    src = np.concatenate([e_src, loops])
    dst = np.concatenate([e_dst, loops])
    pos_sorted = positions[order]
    if len(e_src):
        d = pos_sorted[e_dst] - pos_sorted[e_src]
        dist = np.hypot(d[:, 0], d[:, 1])
        ef = np.column_stack([d[:, 0] / dist, d[:, 1] / dist, dist])
    else:
        ef = np.zeros((0, 3))
    efeat = np.concatenate([ef, np.zeros((n, 3))])

    key = np.lexsort((src, dst))
    src, dst, efeat = src[key], dst[key], efeat[key]
    seg_starts = np.searchsorted(dst, np.arange(n))

    x = node_features(scans, goal)[order]
    lab = labels[order] if labels is not None else None
    return GraphTensors(x=x, src=src, dst=dst, efeat=efeat, seg_starts=seg_starts,
                        labels=lab, inv_order=order)


def tensors_from_graph(graph: EnvGraph, goal, labels=None) -> GraphTensors:
    return build_tensors(graph.positions(), graph.scans(), np.asarray(graph.edges()),
                         goal, labels)


# ---------------------------------------------------------------------------
# forward / backward

def _forward(params: GatParams, gt: GraphTensors, x: np.ndarray | None = None):
    """Returns (pred, cache). pred is per-node distance in canonical order."""
    X = gt.x if x is None else x
    n = X.shape[0]
    seg = gt.seg_starts
    src, dst, ef = gt.src, gt.dst, gt.efeat

    Z = (X @ params.W.reshape(HEADS * HEAD_DIM, FEAT_IN).T).reshape(n, HEADS, HEAD_DIM)
    q = ((Z[dst] * params.a_dst).sum(-1)
         + (Z[src] * params.a_src).sum(-1)
         + ef @ params.a_e.T)                              # (m, H)
    lg = np.tanh(q)
    mx = np.maximum.reduceat(lg, seg, axis=0)
    e = np.exp(lg - mx[dst])
    ssum = np.add.reduceat(e, seg, axis=0)
    alpha = e / ssum[dst]                                  # (m, H)

    m = len(src)
    msg = np.empty((m, HEADS, MSG_DIM))
    msg[:, :, :HEAD_DIM] = Z[src]
    msg[:, :, HEAD_DIM:] = ef[:, None, :]
    weighted = alpha[:, :, None] * msg
    agg = np.add.reduceat(weighted, seg, axis=0)           # (n, H, MSG_DIM)
    A1 = np.tanh(agg.reshape(n, CONCAT_DIM))
    pre1 = A1 @ params.W1.T + params.b1
    H1 = np.tanh(pre1)
    z = H1 @ params.w2 + params.b2
    pred = params.out_scale * softplus(z)

    cache = (X, Z, lg, alpha, msg, A1, H1, z)
    return pred, cache


def _backward(params: GatParams, gt: GraphTensors, cache, dpred: np.ndarray) -> dict:
    X, Z, lg, alpha, msg, A1, H1, z = cache
    n = X.shape[0]
    seg = gt.seg_starts
    src, dst, ef = gt.src, gt.dst, gt.efeat

    dz = dpred * params.out_scale * expit(z)
    dw2 = H1.T @ dz
    db2 = dz.sum()
    dH1 = np.outer(dz, params.w2)
    dpre1 = dH1 * (1.0 - H1 * H1)
    dW1 = dpre1.T @ A1
    db1 = dpre1.sum(axis=0)
    dA1 = dpre1 @ params.W1
    dagg = (dA1 * (1.0 - A1 * A1)).reshape(n, HEADS, MSG_DIM)

    dweighted = dagg[dst]                                  # (m, H, MSG)
    dalpha = (dweighted * msg).sum(-1)
    dmsg = alpha[:, :, None] * dweighted

    t = alpha * dalpha
    segsum = np.add.reduceat(t, seg, axis=0)
    dlg = t - alpha * segsum[dst]
    dq = dlg * (1.0 - lg * lg)                             # (m, H)

    dZ = np.zeros_like(Z)
    np.add.at(dZ, dst, dq[:, :, None] * params.a_dst[None])
    np.add.at(dZ, src, dq[:, :, None] * params.a_src[None] + dmsg[:, :, :HEAD_DIM])
    da_dst = (dq[:, :, None] * Z[dst]).sum(axis=0)
    da_src = (dq[:, :, None] * Z[src]).sum(axis=0)
    da_e = dq.T @ ef
    dW = (dZ.reshape(n, HEADS * HEAD_DIM).T @ X).reshape(HEADS, HEAD_DIM, FEAT_IN)

    return {"W": dW, "a_dst": da_dst, "a_src": da_src, "a_e": da_e,
            "W1": dW1, "b1": db1, "w2": dw2, "b2": np.asarray(db2).reshape(1)}


def gat_forward(params: GatParams, graph: EnvGraph, goal) -> np.ndarray:
    """Per-node distance predictions (meters, >= 0), indexed by node id."""
    if graph.n < 1:
        raise ValueError("graph must contain at least one node")
    gt = tensors_from_graph(graph, goal)
    pred, _ = _forward(params, gt)
    out = np.empty(graph.n)
    out[gt.inv_order] = pred
    return out


# ---------------------------------------------------------------------------
# estimators

class EstKind(enum.Enum):
    LEARNED = "learned"
    ORACLE = "oracle"
    NOISY_ORACLE = "noisy_oracle"
    MIXTURE = "mixture"


@dataclass(frozen=True)
class EstimatorSpec:
    kind: EstKind = EstKind.ORACLE
    sigma: float = 1.0          # noisy-oracle standard deviation, meters
    p_replace: float = 0.5      # mixture probability of using the oracle value
    checkpoint: str | None = None

    def build(self, params: GatParams | None = None) -> "Estimator":
        if self.kind in (EstKind.LEARNED, EstKind.MIXTURE):
            if params is None and self.checkpoint is not None:
                params = load_params(self.checkpoint)
            if params is None:
                raise MissingCheckpointError(
                    f"estimator {self.kind.value} needs trained parameters")
        return Estimator(self.kind, sigma=self.sigma, p_replace=self.p_replace,
                         params=params)

    def label(self) -> str:
        if self.kind == EstKind.NOISY_ORACLE:
            return f"noisy_oracle({self.sigma:g})"
        if self.kind == EstKind.MIXTURE:
            return f"mixture({self.p_replace:g})"
        return self.kind.value


class MissingCheckpointError(RuntimeError):
    pass


class Estimator:
    """Distance estimates for every node of a graph snapshot."""

    def __init__(self, kind: EstKind, sigma: float = 1.0, p_replace: float = 0.5,
                 params: GatParams | None = None):
        self.kind = kind
        self.sigma = sigma
        self.p_replace = p_replace
        self.params = params

    def estimate_all(self, graph: EnvGraph, goal, oracle: GeodesicOracle,
                     rng: np.random.Generator) -> np.ndarray:
        if self.kind == EstKind.LEARNED:
            return np.minimum(gat_forward(self.params, graph, goal), MAX_DISTANCE)
        truth = np.minimum(oracle.to_goal_many(graph.positions()), MAX_DISTANCE)
        if self.kind == EstKind.ORACLE:
            return truth
        if self.kind == EstKind.NOISY_ORACLE:
            noisy = truth + rng.normal(0.0, self.sigma, size=graph.n)
            return np.clip(noisy, 0.0, MAX_DISTANCE)
        learned = np.minimum(gat_forward(self.params, graph, goal), MAX_DISTANCE)
        use_oracle = rng.random(graph.n) < self.p_replace
        return np.where(use_oracle, truth, learned)

    def estimate(self, node_id: int, graph: EnvGraph, goal, oracle, rng) -> float:
        return float(self.estimate_all(graph, goal, oracle, rng)[node_id])


def min_distance(graph: EnvGraph, visited_ids, estimator: Estimator, goal,
                 oracle, rng) -> float:
    """Smallest estimated distance over the nodes reached so far (real or
    imagined); this is the state-level distance the planner rewards against."""
    ests = estimator.estimate_all(graph, goal, oracle, rng)
    ids = list(visited_ids)
    if not ids:
        raise ValueError("empty visited set")
    return float(ests[ids].min())


# ---------------------------------------------------------------------------
# training data

@dataclass
class TrainingSample:
    gt: GraphTensors        # labels set; x holds the all-real features
    x_replaced: np.ndarray  # features with some scans swapped for synthesized ones
    episode_id: str
    snapshot_index: int

    @property
    def n(self):
        return self.gt.x.shape[0]


def _greedy_reference_path(plan, spec, oracle, observe_fn, hop_cap_m: float = 2.0):
    """Waypoint path that greedily descends the true distance-to-goal.

    Every navigable heatmap cell (capped to moderate hops so supervision is
    dense) is a candidate for the next waypoint.
    """
    pos = (0.0, 0.0)
    d = oracle.to_goal(pos)
    path = []
    for _ in range(60):
        if d <= 1.0:
            break
        scan = observe_fn(pos)
        hm = wp.predict_heatmap(scan)
        ii, jj = np.nonzero(hm > 0.5)
        if len(ii) == 0:
            break
        hop = wp.DIST_STEP_M * (jj + 1)
        keep = hop <= hop_cap_m
        ii, jj, hop = ii[keep], jj[keep], hop[keep]
        if len(ii) == 0:
            break
        ang = np.radians(ii * wp.ANGLE_STEP_DEG)
        cand = np.column_stack([pos[0] + hop * np.cos(ang), pos[1] + hop * np.sin(ang)])
        dists = oracle.to_goal_many(cand)
        best = int(np.argmin(dists))
        if dists[best] >= d - 0.25:
            break
        pos = (float(cand[best, 0]), float(cand[best, 1]))
        d = float(dists[best])
        path.append(pos)
    return path


def build_training_set(episodes, synth_spec: SynthesizerSpec, seed: int = 0,
                       replace_prob: float = 0.3, max_extra: int = 5) -> list[TrainingSample]:
    """Progressively grown graphs along greedy reference paths.

    For a path with L waypoints the episode contributes L snapshots; snapshot
    l adds the l-th waypoint plus up to `max_extra` random accessible
    waypoints. Labels are ground-truth geodesic distances. Each node's
    observation is independently replaced by a synthesized one with
    probability `replace_prob` in the alternate feature view.
    """
    rng = np.random.default_rng(seed)
    samples = []
    for plan, spec in episodes:
        sx, sy = spec.start.x, spec.start.y
        oracle = GeodesicOracle(plan, spec.goal, origin_world=(sx, sy))

        def observe_fn(pos_eg, _plan=plan, _sx=sx, _sy=sy):
            return observe(_plan, Pose(pos_eg[0] + _sx, pos_eg[1] + _sy))

        synth = synth_spec.build(observe_fn, seed=int(rng.integers(2 ** 31)))
        goal_eg = (spec.goal[0] - sx, spec.goal[1] - sy)
        path = _greedy_reference_path(plan, spec, oracle, observe_fn)
        if not path:
            continue

        g = init_graph(observe_fn((0.0, 0.0)))
        prev = 0
        for l, p in enumerate(path):
            prev = g.add_node(p, observe_fn(p), Status.VISITED, depth=0, from_id=prev)
            for _ in range(max_extra):
                w = int(rng.integers(g.n))
                hm = wp.predict_heatmap(g.scan(w))
                ii, jj = np.nonzero(hm > 0.5)
                if len(ii) == 0:
                    continue
                k = int(rng.integers(len(ii)))
                cand = wp.waypoint_position(g.node(w).position, int(ii[k]), int(jj[k]))
                if not plan.is_free(cand[0] + sx, cand[1] + sy):
                    continue
                g.add_node(cand, observe_fn(cand), Status.FRONTIER, depth=0, from_id=w)

            labels = np.minimum(oracle.to_goal_many(g.positions()), MAX_DISTANCE)
            gt = build_tensors(g.positions().copy(), g.scans().copy(),
                               np.asarray(g.edges()).copy(), goal_eg, labels=labels)
            x_repl = gt.x.copy()
            replace = rng.random(g.n) < replace_prob
            for i in np.nonzero(replace)[0]:
                nbrs = g.neighbors(int(i))
                if len(nbrs) == 0:
                    continue
                npos = g.positions()[nbrs]
                me = g.positions()[i]
                j = int(nbrs[np.hypot(*(npos - me).T).argmin()])
                scan, _ = synth.synthesize(g.node(j), g.node(int(i)).position)
                row = int(np.nonzero(gt.inv_order == i)[0][0])
                x_repl[row, : wp.ANGLE_BINS] = scan / MAX_SCAN_RANGE
            samples.append(TrainingSample(gt=gt, x_replaced=x_repl,
                                          episode_id=spec.episode_id, snapshot_index=l))
    return samples


def split_dataset(samples, holdout_every: int = 5):
    """Deterministic snapshot-level split: every k-th snapshot is held out."""
    train = [s for s in samples if s.snapshot_index % holdout_every != holdout_every - 1]
    held = [s for s in samples if s.snapshot_index % holdout_every == holdout_every - 1]
    return train, held


# ---------------------------------------------------------------------------
# training

@dataclass
class TrainConfig:
    # the published recipe uses lr 2.5e-5 at a far larger data/model scale;
    # the default here is tuned so the two-phase schedule converges on
    # desk-scale datasets (a few thousand snapshots). Cosine decay with a
    # short warmup keeps the endpoint stable across seeds.
    lr: float = 4e-3
    batch_size: int = 16
    epochs_real: int = 10
    epochs_replaced: int = 10
    grad_clip: float = 5.0
    weight_decay: float = 0.0
    beta1: float = 0.9
    beta2: float = 0.99
    warmup_frac: float = 0.05
    seed: int = 0
    out_scale: float = OUT_SCALE


@dataclass
class TrainResult:
    params: GatParams
    epoch_losses: list     # mean per-node squared error, one entry per epoch
    initial_loss: float
    final_loss: float


def sample_loss_grad(params: GatParams, sample: TrainingSample, use_replaced: bool):
    x = sample.x_replaced if use_replaced else None
    pred, cache = _forward(params, sample.gt, x=x)
    resid = pred - sample.gt.labels
    loss = float(resid @ resid)
    grads = _backward(params, sample.gt, cache, 2.0 * resid)
    return loss, grads


def dataset_loss(params: GatParams, samples, use_replaced: bool = False) -> float:
    """Mean per-node squared error over a sample list."""
    total, count = 0.0, 0
    for s in samples:
        pred, _ = _forward(params, s.gt, x=s.x_replaced if use_replaced else None)
        r = pred - s.gt.labels
        total += float(r @ r)
        count += s.n
    return total / max(count, 1)


def dataset_rmse(params: GatParams, samples, use_replaced: bool = False) -> float:
    return math.sqrt(dataset_loss(params, samples, use_replaced))


def train(samples: list[TrainingSample], config: TrainConfig) -> TrainResult:
    """Two-phase AdamW: real observations first, then the replaced views."""
    if not samples:
        raise ValueError("empty training set")
    rng = np.random.default_rng(config.seed)
    all_labels = np.concatenate([s.gt.labels for s in samples])
    mean_label = float(all_labels.mean())
    params = init_params(seed=config.seed,
                         out_bias=softplus_inv(mean_label / config.out_scale),
                         out_scale=config.out_scale)
    keys = sorted(params.arrays().keys())
    m_state = {k: np.zeros_like(params.arrays()[k]) for k in keys}
    v_state = {k: np.zeros_like(params.arrays()[k]) for k in keys}
    beta1, beta2, eps = config.beta1, config.beta2, 1e-8
    decayed = {"W", "a_dst", "a_src", "a_e", "W1", "w2"}

    initial_loss = dataset_loss(params, samples, use_replaced=False)
    steps_per_epoch = max(1, math.ceil(len(samples) / config.batch_size))
    total_steps = steps_per_epoch * (config.epochs_real + config.epochs_replaced)
    warmup_steps = max(1, int(config.warmup_frac * total_steps))
    step_count = 0
    epoch_losses = []
    phases = [(False, config.epochs_real), (True, config.epochs_replaced)]
    for use_replaced, n_epochs in phases:
        for _epoch in range(n_epochs):
            order = rng.permutation(len(samples))
            epoch_total, epoch_nodes = 0.0, 0
            for b0 in range(0, len(order), config.batch_size):
                batch = order[b0: b0 + config.batch_size]
                grads = {k: np.zeros_like(params.arrays()[k]) for k in keys}
                for si in batch:
                    loss, g = sample_loss_grad(params, samples[si], use_replaced)
                    if not math.isfinite(loss):
                        raise DivergenceError("training loss became non-finite")
                    epoch_total += loss
                    epoch_nodes += samples[si].n
                    for k in keys:
                        grads[k] += g[k]
                gnorm = math.sqrt(sum(float((grads[k] ** 2).sum()) for k in keys))
                if gnorm > config.grad_clip:
                    scale = config.grad_clip / gnorm
                    for k in keys:
                        grads[k] *= scale
                step_count += 1
                warm = min(1.0, step_count / warmup_steps)
                anneal = 0.5 * (1.0 + math.cos(math.pi * step_count / total_steps))
                lr_t = config.lr * warm * anneal
                arrs = params.arrays()
                for k in keys:
                    m_state[k] = beta1 * m_state[k] + (1 - beta1) * grads[k]
                    v_state[k] = beta2 * v_state[k] + (1 - beta2) * grads[k] ** 2
                    mhat = m_state[k] / (1 - beta1 ** step_count)
                    vhat = v_state[k] / (1 - beta2 ** step_count)
                    upd = lr_t * mhat / (np.sqrt(vhat) + eps)
                    if k in decayed:
                        upd = upd + lr_t * config.weight_decay * arrs[k]
                    arrs[k] -= upd
                params.b2 = float(arrs["b2"][0])
            epoch_losses.append(epoch_total / max(epoch_nodes, 1))

    final_loss = dataset_loss(params, samples, use_replaced=False)
    if not final_loss < initial_loss:
        raise DivergenceError(
            f"training did not improve: {initial_loss:.4f} -> {final_loss:.4f}")
    return TrainResult(params=params, epoch_losses=epoch_losses,
                       initial_loss=initial_loss, final_loss=final_loss)


# ---------------------------------------------------------------------------
# checkpoints

def save_params(params: GatParams, path: str):
    doc = {"version": 1,
           "arch": {"heads": HEADS, "head_dim": HEAD_DIM, "feat_in": FEAT_IN,
                    "mlp_hidden": MLP_HIDDEN, "out_scale": params.out_scale},
           "arrays": {}}
    for k, v in params.arrays().items():
        v = np.ascontiguousarray(v, dtype=np.float64)
        doc["arrays"][k] = {"shape": list(v.shape),
                            "data": base64.b64encode(v.tobytes()).decode("ascii")}
    with open(path, "w") as f:
        json.dump(doc, f)


def load_params(path: str) -> GatParams:
    with open(path) as f:
        doc = json.load(f)
    if doc.get("version") != 1:
        raise ValueError(f"unsupported checkpoint version {doc.get('version')!r}")
    arrs = {}
    for k, meta in doc["arrays"].items():
        flat = np.frombuffer(base64.b64decode(meta["data"]), dtype=np.float64)
        arrs[k] = flat.reshape(meta["shape"]).copy()
    return GatParams(W=arrs["W"], a_dst=arrs["a_dst"], a_src=arrs["a_src"],
                     a_e=arrs["a_e"], W1=arrs["W1"], b1=arrs["b1"], w2=arrs["w2"],
                     b2=float(arrs["b2"][0]), out_scale=doc["arch"]["out_scale"])
