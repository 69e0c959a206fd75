"""Procedural navigation benchmarks: generation, difficulty metrics, simulated trials and a difficulty regressor."""

from .cspace import JACKAL, RobotFootprint, inflate
from .envgen import AutomatonParams, generate
from .errors import BarnError
from .grid import Cell, OccupancyGrid, Ray, cast_ray, distance_transform, filled_neighbors
from .metrics import REFERENCE_STATS, MetricStats, MetricVector, compute_all, normalize
from .model import MlpModel, TrainConfig, forward, train
from .nav_sim import PlannerConfig, TrialResult, benchmark_env, run_trial
from .planner import Path, astar, is_connected, select_endpoints

__all__ = [
    "AutomatonParams", "BarnError", "Cell", "JACKAL", "MetricStats", "MetricVector", "MlpModel",
    "OccupancyGrid", "Path", "PlannerConfig", "Ray", "RobotFootprint", "REFERENCE_STATS", "TrainConfig",
    "TrialResult", "astar", "benchmark_env", "cast_ray", "compute_all", "distance_transform",
    "filled_neighbors", "forward", "generate", "inflate", "is_connected", "normalize", "run_trial",
    "select_endpoints", "train",
]
