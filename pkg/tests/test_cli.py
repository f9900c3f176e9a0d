import json

import pytest

from wmnav import cli
from wmnav.env import plan_from_json


def test_gen_env_and_run_roundtrip(tmp_path):
    env_path = tmp_path / "plan.json"
    cli.main(["gen-env", "--seed", "13", "--width", "16", "--height", "16",
              "--rooms", "4", "--episodes", "2", "--out", str(env_path)])
    plan, episodes = plan_from_json(env_path.read_text())
    assert len(episodes) == 2

    result_path = tmp_path / "result.json"
    cli.main(["run", "--env", str(env_path), "--episode", "0",
              "--synth", "perfect", "--estimator", "oracle",
              "--iterations", "15", "--out", str(result_path)])
    doc = json.loads(result_path.read_text())
    assert doc["episode_id"] == episodes[0].episode_id
    assert "metrics" in doc

    tree_path = tmp_path / "tree.dot"
    cli.main(["export-tree", "--result", str(result_path), "--decision", "0",
              "--out", str(tree_path)])
    assert tree_path.read_text().startswith("digraph")


def test_bench_cli(tmp_path):
    cfg = {
        "suite": "mini",
        "plan_seeds": [21],
        "plan_params": {"width_m": 16.0, "height_m": 16.0, "room_count": 4,
                        "corridor_width_m": 1.2},
        "episodes_per_plan": 2,
        "measure_runtime": False,
        "variants": [
            {"name": "a", "synthesizer": {"kind": "perfect"},
             "estimator": {"kind": "oracle"}, "iterations": 10, "horizon": 4},
        ],
    }
    cfg_path = tmp_path / "suite.json"
    cfg_path.write_text(json.dumps(cfg))
    out = tmp_path / "out"
    cli.main(["bench", "--config", str(cfg_path), "--out-dir", str(out)])
    csv_text = (out / "mini.csv").read_text()
    assert csv_text.splitlines()[0].startswith("suite,variant,episode_id")
    assert len(csv_text.splitlines()) == 3
    report = json.loads((out / "mini.json").read_text())
    assert report["aggregates"]["a"]["episodes"] == 2
