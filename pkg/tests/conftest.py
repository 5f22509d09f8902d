"""Shared fixtures: one small synthetic dataset reused across detector-level tests."""

import pytest

from nilmevents.config import PipelineConfig
from nilmevents.io import SynthSpec, synth_recording
from nilmevents.training import build_training_set, train_model


@pytest.fixture(scope="session")
def small_dataset():
    spec = SynthSpec(duration_s=600.0, n_true_events=12, n_nuisance_transients=24,
                     seed=7, fs=500, F0=50)
    rec, gt = synth_recording(spec)
    return rec, gt


@pytest.fixture(scope="session")
def small_config():
    return PipelineConfig(knn_k=3, n_non_events=60, folds=2)


@pytest.fixture(scope="session")
def small_model(small_dataset, small_config):
    rec, gt = small_dataset
    ts = build_training_set(rec, gt, small_config.n_non_events, small_config)
    return train_model(ts, small_config, rec.F0)
