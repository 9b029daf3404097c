"""Curvature-penalized trajectory grouping for tubular centerline tracking."""

from .config import PipelineConfig
from .errors import (
    BacktrackError, ConfigurationError, DimensionError, GenerationError,
    IngestionError, InputError, NoRouteError, TubetrackError,
    UnreachableTargetError,
)
from .estimator import CenterlineTracker
from .features import TubularFeatureField, compute_features
from .graph import TrackedPath, TrajectoryGraph, build_graph, shortest_sequence
from .lifted import LiftedGrid, MetricParams, metric_eval
from .marching import GeodesicPath, backtrack, bridge, curvature_length, fast_march
from .session import Session, prepare, track
from .synth import SyntheticScene, accuracy, compare_models, generate_scene
from .trajectories import Trajectory, extract_trajectories

__version__ = "0.1.0"

__all__ = [
    "BacktrackError", "CenterlineTracker", "ConfigurationError",
    "DimensionError", "GenerationError", "GeodesicPath", "IngestionError",
    "InputError", "LiftedGrid", "MetricParams", "NoRouteError",
    "PipelineConfig", "Session", "SyntheticScene", "TrackedPath",
    "Trajectory", "TrajectoryGraph", "TubetrackError", "TubularFeatureField",
    "UnreachableTargetError", "accuracy", "backtrack", "bridge",
    "build_graph", "compare_models", "compute_features", "curvature_length",
    "extract_trajectories", "fast_march", "generate_scene", "metric_eval",
    "prepare", "shortest_sequence", "track",
]
