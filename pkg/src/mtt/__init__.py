"""Multi-tracklet tracking with adaptive detection clustering."""

from .config import Config, load_config, parse_config
from .core import (
    Detection,
    EmbeddingTable,
    FinalTrack,
    FrameSet,
    Tracklet,
    parse_detections,
    parse_embeddings,
    read_tracks,
    write_detections,
    write_embeddings,
    write_tracks,
)
from .estimator import MultiTrackletTracker, TrackletGenerator
from .metrics import EvalReport, clear_mot, idf1
from .simulate import SceneSpec, SceneTruth, baseline_greedy_tracker, generate

__all__ = [
    "Config",
    "Detection",
    "EmbeddingTable",
    "EvalReport",
    "FinalTrack",
    "FrameSet",
    "MultiTrackletTracker",
    "SceneSpec",
    "SceneTruth",
    "Tracklet",
    "TrackletGenerator",
    "baseline_greedy_tracker",
    "clear_mot",
    "generate",
    "idf1",
    "load_config",
    "parse_config",
    "parse_detections",
    "parse_embeddings",
    "read_tracks",
    "write_detections",
    "write_embeddings",
    "write_tracks",
]
