#!/usr/bin/env python3
"""Train the learned distance estimator on the standard seen plans.

Writes a checkpoint usable by `wmnav bench` / `wmnav run` and prints the
held-out RMSE against the mean-label baseline.
"""

import argparse
import math
import time

import numpy as np

from wmnav import distfn
from wmnav.distfn import TrainConfig
from wmnav.env import generate_floorplan, sample_episode
from wmnav.harness import DEFAULT_PLAN_PARAMS, SEEN_PLAN_SEEDS
from wmnav.worldmodel import SynthKind, SynthesizerSpec


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--episodes-per-plan", type=int, default=40)
    ap.add_argument("--episode-seed0", type=int, default=1000)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out", default="checkpoint.json")
    args = ap.parse_args()

    episodes = []
    for ps in SEEN_PLAN_SEEDS:
        plan = generate_floorplan(ps, **DEFAULT_PLAN_PARAMS)
        for i in range(args.episodes_per_plan):
            episodes.append((plan, sample_episode(plan, args.episode_seed0 + i)))
    print(f"{len(episodes)} training episodes on {len(SEEN_PLAN_SEEDS)} plans")

    t0 = time.perf_counter()
    samples = distfn.build_training_set(
        episodes, SynthesizerSpec(SynthKind.NOISY, sigma0=0.1), seed=args.seed)
    train_set, held = distfn.split_dataset(samples)
    print(f"{len(train_set)} train snapshots, {len(held)} held out "
          f"({time.perf_counter() - t0:.1f}s)")

    labels = np.concatenate([s.gt.labels for s in train_set])
    held_labels = np.concatenate([s.gt.labels for s in held])
    base = math.sqrt(float(np.mean((held_labels - labels.mean()) ** 2)))

    t0 = time.perf_counter()
    result = distfn.train(train_set, TrainConfig(seed=args.seed))
    held_rmse = distfn.dataset_rmse(result.params, held)
    print(f"trained in {time.perf_counter() - t0:.1f}s; "
          f"train RMSE {math.sqrt(result.final_loss):.3f} m, "
          f"held-out RMSE {held_rmse:.3f} m ({held_rmse / base:.1%} of baseline)")
    distfn.save_params(result.params, args.out)
    print(f"checkpoint -> {args.out}")


if __name__ == "__main__":
    main()
