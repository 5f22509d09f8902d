"""Training-set construction and the multi-round adaptive training loop.

Classical training pairs explicitly-known events (segments centered on each
ground-truth label) with randomly sampled non-event windows. Adaptive rounds
re-run the detector on the training area and recycle every false positive as
an extra non-event sample, sharpening the border between the classes.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from nilmevents import normalize
from nilmevents.classify import (
    KnnModel,
    LabeledSample,
    Label,
    SampleOrigin,
    SvmModel,
    knn_train,
    svm_train,
)
from nilmevents.config import PipelineConfig
from nilmevents.detector import detect, sample_non_events
from nilmevents.errors import DataError
from nilmevents.evaluate import match_detections
from nilmevents.features import feature_values
from nilmevents.io import GroundTruth, RawRecording, slice_segment


@dataclass
class TrainingSet:
    """Raw (pre-normalization) feature samples; round 0 means classical training."""

    samples: list[LabeledSample]
    round: int = 0

    def __post_init__(self) -> None:
        labels = {s.label for s in self.samples}
        if len(self.samples) and labels != {Label.EVENT, Label.NON_EVENT}:
            raise DataError("training set must contain both classes")
        if self.round == 0 and any(s.origin is SampleOrigin.ADAPTIVE_FP for s in self.samples):
            raise DataError("adaptive false positives cannot appear in a round-0 set")

    @property
    def n_events(self) -> int:
        return sum(1 for s in self.samples if s.label is Label.EVENT)

    @property
    def n_non_events(self) -> int:
        return len(self.samples) - self.n_events

    def matrix(self) -> np.ndarray:
        return np.stack([s.vector for s in self.samples])


def _events_inside(gt: GroundTruth, intervals: list[tuple[float, float]], half_window: float):
    return [
        l for l in gt
        if any(a + half_window <= l.time_s <= b - half_window for a, b in intervals)
    ]


def build_training_set(rec: RawRecording, gt: GroundTruth, n_non_events: int,
                       cfg: PipelineConfig,
                       intervals: list[tuple[float, float]] | None = None) -> TrainingSet:
    """One EVENT sample per usable label plus n_non_events random non-events."""
    if intervals is None:
        intervals = [(0.0, rec.duration_s)]
    half = cfg.detector.window_s / 2
    event_labels = _events_inside(gt, intervals, half)
    if not event_labels:
        raise DataError("no ground-truth event fits inside the training area")

    samples: list[LabeledSample] = []
    for l in event_labels:
        seg = slice_segment(rec, l.time_s, cfg.detector.window_s)
        samples.append(LabeledSample(
            vector=feature_values(seg, cfg.feature),
            label=Label.EVENT,
            origin=SampleOrigin.GROUND_TRUTH_EVENT,
            sample_index=len(samples),
            center_time_s=l.time_s,
        ))
    for t in sample_non_events(rec, gt, n_non_events, cfg.detector, intervals):
        seg = slice_segment(rec, t, cfg.detector.window_s)
        samples.append(LabeledSample(
            vector=feature_values(seg, cfg.feature),
            label=Label.NON_EVENT,
            origin=SampleOrigin.RANDOM_NON_EVENT,
            sample_index=len(samples),
            center_time_s=t,
        ))
    return TrainingSet(samples=samples, round=0)


def train_model(ts: TrainingSet, cfg: PipelineConfig, f0: int) -> KnnModel | SvmModel:
    """Fit normalization on the set's matrix, then train the configured classifier."""
    matrix = ts.matrix()
    params = normalize.fit(matrix, cfg.norm)
    normalized = params.transform(matrix)
    norm_samples = [
        replace(s, vector=normalized[i]) for i, s in enumerate(ts.samples)
    ]
    if cfg.classifier == "knn":
        return knn_train(norm_samples, cfg.knn_k, params, cfg.feature, f0)
    return svm_train(norm_samples, cfg.svm_c, cfg.svm_gamma, params, cfg.feature, f0)


def adaptive_train(rec: RawRecording, gt: GroundTruth, base: TrainingSet, rounds: int,
                   cfg: PipelineConfig,
                   intervals: list[tuple[float, float]] | None = None,
                   jobs: int = 1):
    """Round 0 trains on `base`; each later round recycles training-area FPs.

    A detection counts as a training false positive when no ground-truth label
    lies within match_tol_s of it; its segment joins the non-event class and
    the model is retrained (normalization refit on the grown matrix). A round
    that yields no false positives short-circuits the remaining rounds.

    Returns (model, final TrainingSet, per-round stats).
    """
    if rounds < 0:
        raise DataError("rounds must be >= 0")
    if intervals is None:
        intervals = [(0.0, rec.duration_s)]
    ts = base
    model = train_model(ts, cfg, rec.F0)
    stats = [{
        "round": 0, "train_tp": None, "train_fp": None,
        "set_size_event": ts.n_events, "set_size_nonevent": ts.n_non_events,
    }]
    label_times = gt.times()
    tol = cfg.detector.match_tol_s
    for r in range(1, rounds + 1):
        detections = []
        for iv in intervals:
            detections.extend(detect(rec, model, cfg.detector, area=iv, jobs=jobs))
        det_times = np.array([d.time_s for d in detections])
        result = match_detections(det_times, label_times, tol)
        false_pos = [
            d for d in detections
            if len(label_times) == 0 or np.min(np.abs(label_times - d.time_s)) > tol
        ]
        new_samples = list(ts.samples)
        for d in false_pos:
            seg = slice_segment(rec, d.time_s, cfg.detector.window_s)
            new_samples.append(LabeledSample(
                vector=feature_values(seg, cfg.feature),
                label=Label.NON_EVENT,
                origin=SampleOrigin.ADAPTIVE_FP,
                sample_index=len(new_samples),
                center_time_s=d.time_s,
            ))
        ts = TrainingSet(samples=new_samples, round=r)
        stats.append({
            "round": r, "train_tp": result.tp, "train_fp": result.fp,
            "set_size_event": ts.n_events, "set_size_nonevent": ts.n_non_events,
        })
        if not false_pos:
            break
        model = train_model(ts, cfg, rec.F0)
    return model, ts, stats
