"""World-model navigation on procedural 2D floor plans."""

from .env import (Action, EpisodeSpec, FloorPlan, GeodesicOracle, Pose,
                  generate_floorplan, geodesic_distance, observe, sample_episode,
                  step)
from .waypoint import Waypoint, predict_heatmap, select_waypoints
from .worldmodel import (EnvGraph, SceneSynthesizer, Status, SynthKind,
                         SynthesizerSpec, imagined_expand, init_graph)
from .distfn import (Estimator, EstimatorSpec, EstKind, GatParams, TrainConfig,
                     gat_forward, train)
from .planner import PlannerConfig, plan
from .agent import EpisodeConfig, EpisodeResult, navigate_to, run_episode
from .harness import (BenchmarkConfig, Metrics, SuiteReport, VariantSpec,
                      compute_metrics, run_suite)

__version__ = "0.1.0"
