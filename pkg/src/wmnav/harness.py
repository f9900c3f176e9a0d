"""Benchmarking: navigation metrics, ablation suites, and report export.

Suites run every variant over a shared episode set (paired seeds), so
variant comparisons see the same worlds, starts and goals. Reports are
deterministic; wall-clock timing is optional because it is the one column
that cannot be reproduced byte-for-byte.
"""

from __future__ import annotations

import csv
import io
import json
import math
import time
from dataclasses import dataclass, field

import numpy as np

from .agent import EpisodeConfig, EpisodeResult, run_episode
from .distfn import (EstimatorSpec, EstKind, GatParams, MissingCheckpointError,
                     load_params)
from .env import (EpisodeSpec, FloorPlan, Pose, distance_field, generate_floorplan,
                  observe, sample_episode)
from .planner import PlannerConfig
from .worldmodel import SynthesizerSpec, SynthKind, EGNode, Status

SUCCESS_RADIUS_M = 3.0

SEEN_PLAN_SEEDS = [101, 102, 103, 104, 105]
UNSEEN_PLAN_SEEDS = [106, 107, 108, 109, 110]
DEFAULT_PLAN_PARAMS = {"width_m": 20.0, "height_m": 20.0, "room_count": 5,
                       "corridor_width_m": 1.2}


@dataclass(frozen=True)
class Metrics:
    ne: float     # final geodesic distance to goal, meters
    tl: float     # executed path length, meters
    sr: int       # success: stopped within the success radius
    osr: int      # oracle success: ever within the success radius
    spl: float    # success weighted by path length

    def check(self):
        if self.sr > self.osr:
            raise AssertionError("SR must not exceed OR")
        if self.spl > self.sr + 1e-12:
            raise AssertionError("SPL must not exceed SR")


def compute_metrics(result: EpisodeResult, spec: EpisodeSpec, plan: FloorPlan) -> Metrics:
    f = distance_field(plan, spec.goal)
    cs = plan.cell_size
    xs = np.array([p.x for p in result.trajectory.poses])
    ys = np.array([p.y for p in result.trajectory.poses])
    cols = np.clip(np.floor(xs / cs).astype(int), 0, plan.shape[1] - 1)
    rows = np.clip(np.floor(ys / cs).astype(int), 0, plan.shape[0] - 1)
    dists = f[rows, cols]
    ne = float(dists[-1])
    tl = float(np.hypot(np.diff(xs), np.diff(ys)).sum())
    sr = int(result.stopped and ne <= SUCCESS_RADIUS_M)
    osr = int(dists.min() <= SUCCESS_RADIUS_M)
    spl = sr * spec.geodesic_ref / max(tl, spec.geodesic_ref)
    m = Metrics(ne=ne, tl=tl, sr=sr, osr=osr, spl=spl)
    m.check()
    return m


# ---------------------------------------------------------------------------
# suite configuration

@dataclass(frozen=True)
class VariantSpec:
    name: str
    synthesizer: SynthesizerSpec = field(default_factory=SynthesizerSpec)
    estimator: EstimatorSpec = field(default_factory=EstimatorSpec)
    iterations: int = 50
    horizon: int = 4


@dataclass
class BenchmarkConfig:
    suite: str
    variants: list
    plan_seeds: list = field(default_factory=lambda: SEEN_PLAN_SEEDS + UNSEEN_PLAN_SEEDS)
    plan_params: dict = field(default_factory=lambda: dict(DEFAULT_PLAN_PARAMS))
    episodes_per_plan: int = 20
    episode_seed0: int = 0
    seed: int = 0
    measure_runtime: bool = True
    checkpoint: str | None = None

    def to_json(self) -> dict:
        doc = {
            "suite": self.suite,
            "plan_seeds": list(self.plan_seeds),
            "plan_params": dict(self.plan_params),
            "episodes_per_plan": self.episodes_per_plan,
            "episode_seed0": self.episode_seed0,
            "seed": self.seed,
            "measure_runtime": self.measure_runtime,
            "checkpoint": self.checkpoint,
            "variants": [
                {"name": v.name,
                 "synthesizer": {"kind": v.synthesizer.kind.value, "sigma0": v.synthesizer.sigma0},
                 "estimator": {"kind": v.estimator.kind.value, "sigma": v.estimator.sigma,
                               "p_replace": v.estimator.p_replace},
                 "iterations": v.iterations, "horizon": v.horizon}
                for v in self.variants
            ],
        }
        return doc

    @staticmethod
    def from_json(doc: dict) -> "BenchmarkConfig":
        variants = [
            VariantSpec(
                name=v["name"],
                synthesizer=SynthesizerSpec(kind=SynthKind(v["synthesizer"]["kind"]),
                                            sigma0=v["synthesizer"].get("sigma0", 0.1)),
                estimator=EstimatorSpec(kind=EstKind(v["estimator"]["kind"]),
                                        sigma=v["estimator"].get("sigma", 1.0),
                                        p_replace=v["estimator"].get("p_replace", 0.5)),
                iterations=v.get("iterations", 50),
                horizon=v.get("horizon", 4),
            )
            for v in doc["variants"]
        ]
        return BenchmarkConfig(
            suite=doc["suite"], variants=variants,
            plan_seeds=doc.get("plan_seeds", SEEN_PLAN_SEEDS + UNSEEN_PLAN_SEEDS),
            plan_params=doc.get("plan_params", dict(DEFAULT_PLAN_PARAMS)),
            episodes_per_plan=doc.get("episodes_per_plan", 20),
            episode_seed0=doc.get("episode_seed0", 0),
            seed=doc.get("seed", 0),
            measure_runtime=doc.get("measure_runtime", True),
            checkpoint=doc.get("checkpoint"),
        )


@dataclass
class SuiteRow:
    suite: str
    variant: str
    episode_id: str
    metrics: Metrics
    plan_steps: int
    s_per_step: float | None
    geodesic_ref: float = 0.0
    tl: float = 0.0


@dataclass
class SuiteReport:
    config: BenchmarkConfig
    rows: list
    aggregates: dict
    invariant_checks: int = 0
    results: dict = field(default_factory=dict)  # episode_id -> EpisodeResult per variant


def benchmark_episodes(cfg: BenchmarkConfig):
    """The shared (plan, episode) set every variant runs on."""
    out = []
    for ps in cfg.plan_seeds:
        plan = generate_floorplan(ps, **cfg.plan_params)
        for i in range(cfg.episodes_per_plan):
            out.append((plan, sample_episode(plan, cfg.episode_seed0 + i)))
    return out


def _aggregate(rows):
    agg = {}
    by_variant = {}
    for r in rows:
        by_variant.setdefault(r.variant, []).append(r)
    for name, vr in by_variant.items():
        timing = [r.s_per_step for r in vr if r.s_per_step is not None]
        agg[name] = {
            "episodes": len(vr),
            "NE": float(np.mean([r.metrics.ne for r in vr])),
            "TL": float(np.mean([r.metrics.tl for r in vr])),
            "SR": float(np.mean([r.metrics.sr for r in vr])),
            "OR": float(np.mean([r.metrics.osr for r in vr])),
            "SPL": float(np.mean([r.metrics.spl for r in vr])),
            "s_per_step": float(np.mean(timing)) if timing else None,
        }
    return agg


def run_suite(cfg: BenchmarkConfig, params: GatParams | None = None,
              record_results: bool = False, progress=None) -> SuiteReport:
    """Run every variant of the grid over the shared episode set."""
    needs_learned = any(v.estimator.kind in (EstKind.LEARNED, EstKind.MIXTURE)
                        for v in cfg.variants)
    if needs_learned and params is None:
        if cfg.checkpoint is None:
            raise MissingCheckpointError(
                "suite contains learned estimators but no checkpoint was given")
        params = load_params(cfg.checkpoint)

    episodes = benchmark_episodes(cfg)
    rows = []
    results = {}
    checks = 0
    for v in cfg.variants:
        planner_cfg = PlannerConfig(iterations=v.iterations, horizon=v.horizon)
        for plan, spec in episodes:
            ecfg = EpisodeConfig(planner=planner_cfg, synthesizer=v.synthesizer,
                                 estimator=v.estimator, seed=cfg.seed, params=params)
            t0 = time.perf_counter()
            res = run_episode(plan, spec, ecfg)
            wall = time.perf_counter() - t0
            m = compute_metrics(res, spec, plan)
            checks += res.invariant_checks
            sps = None
            if cfg.measure_runtime:
                sps = res.plan_seconds / max(res.plan_calls, 1)
            rows.append(SuiteRow(suite=cfg.suite, variant=v.name,
                                 episode_id=spec.episode_id, metrics=m,
                                 plan_steps=res.plan_calls, s_per_step=sps,
                                 geodesic_ref=spec.geodesic_ref, tl=m.tl))
            if record_results:
                results.setdefault(v.name, {})[spec.episode_id] = res
            if progress is not None:
                progress(v.name, spec.episode_id, m, wall)
    rows.sort(key=lambda r: (r.variant, r.episode_id))
    return SuiteReport(config=cfg, rows=rows, aggregates=_aggregate(rows),
                       invariant_checks=checks, results=results)


CSV_COLUMNS = ["suite", "variant", "episode_id", "NE", "TL", "SR", "OR", "SPL",
               "plan_steps", "s_per_step"]


def report_to_csv(report: SuiteReport) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for r in report.rows:
        w.writerow([
            r.suite, r.variant, r.episode_id,
            f"{r.metrics.ne:.6f}", f"{r.metrics.tl:.6f}",
            r.metrics.sr, r.metrics.osr, f"{r.metrics.spl:.6f}",
            r.plan_steps,
            "" if r.s_per_step is None else f"{r.s_per_step:.6f}",
        ])
    return buf.getvalue()


def report_to_json(report: SuiteReport) -> str:
    return json.dumps({
        "config": report.config.to_json(),
        "aggregates": report.aggregates,
        "rows": [
            {"suite": r.suite, "variant": r.variant, "episode_id": r.episode_id,
             "NE": r.metrics.ne, "TL": r.metrics.tl, "SR": r.metrics.sr,
             "OR": r.metrics.osr, "SPL": r.metrics.spl,
             "plan_steps": r.plan_steps, "s_per_step": r.s_per_step}
            for r in report.rows
        ],
    }, indent=2)


# ---------------------------------------------------------------------------
# tree export

def export_tree(result_doc: dict, decision_index: int, path: str):
    """Write the recorded search tree of one decision to a text graph file."""
    decisions = result_doc.get("decisions", [])
    if not (0 <= decision_index < len(decisions)):
        raise KeyError(f"no decision {decision_index} in this result")
    tree = decisions[decision_index].get("tree")
    if tree is None:
        raise KeyError(f"decision {decision_index} has no recorded tree "
                       "(run with record_trees enabled)")
    with open(path, "w") as fh:
        fh.write(tree)


# ---------------------------------------------------------------------------
# synthesis error vs depth

def synthesis_error_curve(plan: FloorPlan, synth_spec: SynthesizerSpec,
                          depths: int = 4, chains: int = 100, seed: int = 0) -> np.ndarray:
    """Mean per-ray RMSE between synthesized and true scans at each depth.

    Each chain walks random nearby targets, synthesizing depth 1..`depths`
    observations and comparing every one to the ground-truth scan there.
    """
    rng = np.random.default_rng(seed)
    free = np.argwhere(~plan.cells)
    errs = [[] for _ in range(depths)]

    def observe_world(pos):
        return observe(plan, Pose(pos[0], pos[1]))

    for _ in range(chains):
        r, c = free[rng.integers(len(free))]
        pos = plan.cell_center(int(r), int(c))
        synth = synth_spec.build(observe_world, seed=int(rng.integers(2 ** 31)))
        scan = observe_world(pos)
        synth.remember(pos, scan)
        depth = 0
        for k in range(1, depths + 1):
            target = None
            for _try in range(50):
                ang = rng.uniform(0, 2 * math.pi)
                dist = rng.uniform(0.5, 2.5)
                cand = (pos[0] + dist * math.cos(ang), pos[1] + dist * math.sin(ang))
                if plan.is_free(cand[0], cand[1]):
                    target = cand
                    break
            if target is None:
                break
            node = EGNode(id=0, position=pos, status=Status.IMAGINED, synthesis_depth=depth)
            synthesized, depth = synth.synthesize(node, target)
            truth = observe_world(target)
            errs[k - 1].append(float(np.sqrt(np.mean((synthesized - truth) ** 2))))
            pos = target
    return np.array([np.mean(e) if e else np.nan for e in errs])


# ---------------------------------------------------------------------------
# canned ablation grids

def table_world_model_variants(sigma0: float = 0.3) -> list:
    learned = EstimatorSpec(kind=EstKind.LEARNED)
    return [
        VariantSpec("perfect_imagination", SynthesizerSpec(SynthKind.PERFECT), learned),
        VariantSpec(f"noisy_synth_{sigma0:g}", SynthesizerSpec(SynthKind.NOISY, sigma0=sigma0), learned),
        VariantSpec("copy_memory", SynthesizerSpec(SynthKind.COPY_MEMORY), learned),
    ]


def table_iterations_variants(iterations=(10, 30, 50, 70)) -> list:
    synth = SynthesizerSpec(SynthKind.NOISY, sigma0=0.3)
    est = EstimatorSpec(kind=EstKind.NOISY_ORACLE, sigma=1.0)
    return [VariantSpec(f"iters_{n}", synth, est, iterations=n) for n in iterations]


def table_horizon_variants(horizons=(0, 2, 4, 6)) -> list:
    synth = SynthesizerSpec(SynthKind.NOISY, sigma0=0.3)
    est = EstimatorSpec(kind=EstKind.NOISY_ORACLE, sigma=1.0)
    return [VariantSpec("greedy_selection" if h == 0 else f"horizon_{h}",
                        synth, est, horizon=h) for h in horizons]


def replacement_sweep_variants(probs=(0.0, 0.2, 0.5, 0.8, 1.0)) -> list:
    synth = SynthesizerSpec(SynthKind.PERFECT)
    return [VariantSpec(f"replace_{p:g}", synth,
                        EstimatorSpec(kind=EstKind.MIXTURE, p_replace=p))
            for p in probs]
