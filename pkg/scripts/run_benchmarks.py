#!/usr/bin/env python3
"""Reproduce the ablation tables and sweeps on the standard benchmark.

Suites (200 paired episodes each unless trimmed with --episodes-per-plan):
  world-model     perfect / noisy / copy-memory synthesizers, learned estimator
  iterations      search budgets 10/30/50/70
  horizons        planning horizons 0 (greedy) / 2 / 4 / 6
  replacement     oracle-replacement probability sweep 0 .. 1
  synth-error     synthesized-scan RMSE vs synthesis depth

Needs a checkpoint from scripts/train_estimator.py for the learned suites.
"""

import argparse
import sys
import time

from wmnav import distfn, harness
from wmnav.harness import (BenchmarkConfig, replacement_sweep_variants,
                           table_horizon_variants, table_iterations_variants,
                           table_world_model_variants)
from wmnav.env import generate_floorplan
from wmnav.worldmodel import SynthKind, SynthesizerSpec


def show(report):
    for name, agg in report.aggregates.items():
        sps = "-" if agg["s_per_step"] is None else f"{agg['s_per_step']:.3f}"
        print(f"  {name:<24} SR={100 * agg['SR']:5.1f} OR={100 * agg['OR']:5.1f} "
              f"SPL={100 * agg['SPL']:5.1f} NE={agg['NE']:5.2f} TL={agg['TL']:5.2f} "
              f"s/step={sps}")


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--checkpoint", default="checkpoint.json")
    ap.add_argument("--episodes-per-plan", type=int, default=20)
    ap.add_argument("--suites", nargs="+",
                    default=["world-model", "iterations", "horizons",
                             "replacement", "synth-error"])
    args = ap.parse_args()

    grids = {
        "world-model": table_world_model_variants(),
        "iterations": table_iterations_variants(),
        "horizons": table_horizon_variants(),
        "replacement": replacement_sweep_variants(),
    }
    params = None
    for name in args.suites:
        if name == "synth-error":
            plan = generate_floorplan(101, **harness.DEFAULT_PLAN_PARAMS)
            curve = harness.synthesis_error_curve(
                plan, SynthesizerSpec(SynthKind.NOISY, sigma0=0.1), depths=4, chains=100)
            print("synth-error: mean scan RMSE by depth:",
                  " ".join(f"{v:.3f}" for v in curve))
            continue
        variants = grids[name]
        cfg = BenchmarkConfig(suite=name, variants=variants,
                              episodes_per_plan=args.episodes_per_plan,
                              checkpoint=args.checkpoint)
        needs_ckpt = any(v.estimator.kind.value in ("learned", "mixture")
                         for v in variants)
        if needs_ckpt and params is None:
            try:
                params = distfn.load_params(args.checkpoint)
            except FileNotFoundError:
                print(f"skipping {name}: no checkpoint at {args.checkpoint} "
                      "(run scripts/train_estimator.py first)")
                continue
        t0 = time.perf_counter()
        report = harness.run_suite(cfg, params=params)
        print(f"{name} ({time.perf_counter() - t0:.0f}s):")
        show(report)


if __name__ == "__main__":
    sys.exit(main())
