"""Supervised appliance event detection for high-frequency electricity recordings.

The package learns a user-defined event model from labeled waveform segments,
detects ON/OFF events with a sliding multivariate classifier, and shrinks the
false-positive rate with a boosting-style adaptive training loop.
"""

from nilmevents.io import (
    EventLabel,
    GroundTruth,
    RawRecording,
    SynthSpec,
    WaveformSegment,
    load_ground_truth,
    load_recording,
    slice_segment,
    store_ground_truth,
    store_recording,
    synth_recording,
)
from nilmevents.features import FeatureKind, extract_feature
from nilmevents.normalize import NormKind, NormalizationParams
from nilmevents.classify import KnnModel, SvmModel, grid_search, load_model, save_model, svm_train
from nilmevents.detector import Detection, DetectorConfig, detect, sample_non_events
from nilmevents.training import TrainingSet, adaptive_train, build_training_set
from nilmevents.evaluate import EvalReport, MatchResult, cross_validate, match_detections, score

__version__ = "0.1.0"

__all__ = [
    "EventLabel",
    "GroundTruth",
    "RawRecording",
    "SynthSpec",
    "WaveformSegment",
    "load_ground_truth",
    "load_recording",
    "slice_segment",
    "store_ground_truth",
    "store_recording",
    "synth_recording",
    "FeatureKind",
    "extract_feature",
    "NormKind",
    "NormalizationParams",
    "KnnModel",
    "SvmModel",
    "grid_search",
    "svm_train",
    "save_model",
    "load_model",
    "Detection",
    "DetectorConfig",
    "detect",
    "sample_non_events",
    "TrainingSet",
    "build_training_set",
    "adaptive_train",
    "MatchResult",
    "EvalReport",
    "match_detections",
    "score",
    "cross_validate",
]
