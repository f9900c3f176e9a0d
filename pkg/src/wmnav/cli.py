"""Command-line entry points: gen-env, train-dist, run, bench, export-tree."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import distfn, harness
from .agent import EpisodeConfig, result_to_json, run_episode
from .distfn import EstimatorSpec, EstKind, TrainConfig
from .env import generate_floorplan, plan_from_json, plan_to_json, sample_episode
from .harness import BenchmarkConfig, SEEN_PLAN_SEEDS, DEFAULT_PLAN_PARAMS
from .planner import PlannerConfig
from .worldmodel import SynthesizerSpec, SynthKind


def _cmd_gen_env(args):
    plan = generate_floorplan(args.seed, width_m=args.width, height_m=args.height,
                              room_count=args.rooms, corridor_width_m=args.corridor_width)
    episodes = [sample_episode(plan, s) for s in range(args.episodes)]
    Path(args.out).write_text(plan_to_json(plan, episodes))
    print(f"wrote {args.out}: {plan.shape[1]}x{plan.shape[0]} cells, "
          f"{len(plan.rooms)} rooms, {len(episodes)} episodes")


def _cmd_train_dist(args):
    episodes = []
    for ps in args.plan_seeds:
        plan = generate_floorplan(ps, **DEFAULT_PLAN_PARAMS)
        for i in range(args.episodes_per_plan):
            episodes.append((plan, sample_episode(plan, args.episode_seed0 + i)))
    print(f"building training set from {len(episodes)} episodes ...")
    samples = distfn.build_training_set(
        episodes, SynthesizerSpec(SynthKind.NOISY, sigma0=args.synth_sigma0),
        seed=args.seed, replace_prob=args.replace_prob)
    train_set, held = distfn.split_dataset(samples)
    print(f"{len(train_set)} training snapshots, {len(held)} held out")
    cfg = TrainConfig(lr=args.lr, batch_size=args.batch_size, seed=args.seed,
                      epochs_real=args.epochs_real, epochs_replaced=args.epochs_replaced)
    result = distfn.train(train_set, cfg)
    distfn.save_params(result.params, args.out)
    rmse = distfn.dataset_rmse(result.params, held) if held else float("nan")
    print(f"saved {args.out}; train loss {result.initial_loss:.3f} -> "
          f"{result.final_loss:.3f}, held-out RMSE {rmse:.3f} m")


def _synth_spec(name: str, sigma0: float) -> SynthesizerSpec:
    return SynthesizerSpec(kind=SynthKind(name), sigma0=sigma0)


def _est_spec(name: str, sigma: float, p_replace: float) -> EstimatorSpec:
    return EstimatorSpec(kind=EstKind(name), sigma=sigma, p_replace=p_replace)


def _cmd_run(args):
    plan, episodes = plan_from_json(Path(args.env).read_text())
    if not episodes:
        raise SystemExit("environment file holds no episodes; regenerate with --episodes")
    spec = episodes[args.episode]
    params = distfn.load_params(args.checkpoint) if args.checkpoint else None
    cfg = EpisodeConfig(
        planner=PlannerConfig(iterations=args.iterations, horizon=args.horizon),
        synthesizer=_synth_spec(args.synth, args.synth_sigma0),
        estimator=_est_spec(args.estimator, args.est_sigma, args.p_replace),
        seed=args.seed, params=params, record_trees=True)
    result = run_episode(plan, spec, cfg)
    metrics = harness.compute_metrics(result, spec, plan)
    doc = result_to_json(result)
    doc["metrics"] = {"NE": metrics.ne, "TL": metrics.tl, "SR": metrics.sr,
                      "OR": metrics.osr, "SPL": metrics.spl}
    Path(args.out).write_text(json.dumps(doc, indent=2))
    print(f"{spec.episode_id}: {result.outcome}, NE={metrics.ne:.2f} m, "
          f"SR={metrics.sr}, SPL={metrics.spl:.3f} -> {args.out}")


def _cmd_bench(args):
    cfg = BenchmarkConfig.from_json(json.loads(Path(args.config).read_text()))
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    report = harness.run_suite(cfg)
    csv_path = out_dir / f"{cfg.suite}.csv"
    json_path = out_dir / f"{cfg.suite}.json"
    csv_path.write_text(harness.report_to_csv(report))
    json_path.write_text(harness.report_to_json(report))
    print(f"wrote {csv_path} and {json_path}")
    for name, agg in report.aggregates.items():
        sps = "-" if agg["s_per_step"] is None else f"{agg['s_per_step']:.3f}"
        print(f"  {name:<24} SR={100 * agg['SR']:.1f} OR={100 * agg['OR']:.1f} "
              f"SPL={100 * agg['SPL']:.1f} NE={agg['NE']:.2f} TL={agg['TL']:.2f} "
              f"s/step={sps}")


def _cmd_export_tree(args):
    doc = json.loads(Path(args.result).read_text())
    harness.export_tree(doc, args.decision, args.out)
    print(f"wrote {args.out}")


def main(argv=None):
    p = argparse.ArgumentParser(prog="wmnav",
                                description="world-model navigation toolkit")
    sub = p.add_subparsers(dest="cmd", required=True)

    g = sub.add_parser("gen-env", help="generate a floor plan plus episodes")
    g.add_argument("--seed", type=int, required=True)
    g.add_argument("--width", type=float, default=20.0)
    g.add_argument("--height", type=float, default=20.0)
    g.add_argument("--rooms", type=int, default=5)
    g.add_argument("--corridor-width", type=float, default=1.2)
    g.add_argument("--episodes", type=int, default=20)
    g.add_argument("--out", required=True)
    g.set_defaults(fn=_cmd_gen_env)

    t = sub.add_parser("train-dist", help="train the distance estimator")
    t.add_argument("--plan-seeds", type=int, nargs="+", default=SEEN_PLAN_SEEDS)
    t.add_argument("--episodes-per-plan", type=int, default=40)
    t.add_argument("--episode-seed0", type=int, default=1000)
    t.add_argument("--seed", type=int, default=0)
    t.add_argument("--lr", type=float, default=2.5e-5)
    t.add_argument("--batch-size", type=int, default=16)
    t.add_argument("--epochs-real", type=int, default=10)
    t.add_argument("--epochs-replaced", type=int, default=10)
    t.add_argument("--replace-prob", type=float, default=0.3)
    t.add_argument("--synth-sigma0", type=float, default=0.1)
    t.add_argument("--out", required=True)
    t.set_defaults(fn=_cmd_train_dist)

    r = sub.add_parser("run", help="run one episode from an environment file")
    r.add_argument("--env", required=True)
    r.add_argument("--episode", type=int, default=0)
    r.add_argument("--synth", choices=[k.value for k in SynthKind], default="perfect")
    r.add_argument("--synth-sigma0", type=float, default=0.1)
    r.add_argument("--estimator", choices=[k.value for k in EstKind], default="oracle")
    r.add_argument("--est-sigma", type=float, default=1.0)
    r.add_argument("--p-replace", type=float, default=0.5)
    r.add_argument("--iterations", type=int, default=50)
    r.add_argument("--horizon", type=int, default=4)
    r.add_argument("--seed", type=int, default=0)
    r.add_argument("--checkpoint", default=None)
    r.add_argument("--out", required=True)
    r.set_defaults(fn=_cmd_run)

    b = sub.add_parser("bench", help="run a benchmark suite from a JSON config")
    b.add_argument("--config", required=True)
    b.add_argument("--out-dir", required=True)
    b.set_defaults(fn=_cmd_bench)

    e = sub.add_parser("export-tree", help="dump one decision's search tree")
    e.add_argument("--result", required=True)
    e.add_argument("--decision", type=int, default=0)
    e.add_argument("--out", required=True)
    e.set_defaults(fn=_cmd_export_tree)

    args = p.parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
