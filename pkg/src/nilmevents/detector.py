"""Sliding-window event detector: classify 10 s windows on a period-aligned
grid and merge nearby positives into discrete detections."""

from __future__ import annotations

import csv
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from nilmevents.errors import DataError
from nilmevents.features import feature_values
from nilmevents.io import GroundTruth, RawRecording, WaveformSegment

WINDOW_CHUNK = 256  # fixed chunking keeps results identical across worker counts


@dataclass(frozen=True)
class DetectorConfig:
    step_periods: int = 30
    window_s: float = 10.0
    merge_gap_s: float = 5.0
    match_tol_s: float = 1.0
    non_event_min_dist_s: float = 10.0
    rng_seed: int = 0

    def __post_init__(self) -> None:
        if self.step_periods < 1:
            raise DataError("step_periods must be >= 1")
        if self.merge_gap_s > self.window_s:
            raise DataError("merge_gap_s must not exceed window_s")
        if self.match_tol_s <= 0:
            raise DataError("match_tol_s must be positive")


@dataclass(frozen=True)
class Detection:
    """One merged run of positive windows; time_s is the run's temporal center."""

    time_s: float
    first_s: float
    last_s: float
    window_count: int


def _window_starts(rec: RawRecording, cfg: DetectorConfig,
                   area: tuple[float, float] | None) -> tuple[np.ndarray, int]:
    n = rec.samples_per_period
    w_samples = int(round(cfg.window_s * rec.fs))
    t0, t1 = (0.0, rec.duration_s) if area is None else area
    if t1 - t0 < cfg.window_s:
        return np.empty(0, dtype=np.int64), w_samples
    first = int(np.ceil(t0 * rec.fs / n)) * n
    last_sample = int(np.floor(t1 * rec.fs))
    starts = np.arange(first, last_sample - w_samples + 1, cfg.step_periods * n, dtype=np.int64)
    return starts, w_samples


def _classify_chunk(rec: RawRecording, model, starts: np.ndarray, w_samples: int) -> np.ndarray:
    rows = np.empty((len(starts), w_samples // rec.samples_per_period))
    for i, s in enumerate(starts):
        seg = WaveformSegment(
            voltage=rec.voltage[s: s + w_samples],
            current=rec.current[s: s + w_samples],
            fs=rec.fs,
            F0=rec.F0,
        )
        rows[i] = feature_values(seg, model.feature_kind)
    return model.predict_batch(rows)


def detect(rec: RawRecording, model, cfg: DetectorConfig,
           area: tuple[float, float] | None = None, jobs: int = 1) -> list[Detection]:
    """Classify every window on the step grid and merge positive runs.

    Windows that would exceed the recording (or `area`) bounds are skipped.
    Runs of positive windows whose neighbor gaps stay below merge_gap_s
    collapse into a single Detection at the run's temporal center.
    """
    if model.f0 != rec.F0:
        raise DataError(f"model mains frequency {model.f0} Hz != recording F0 {rec.F0} Hz")
    if rec.duration_s < cfg.window_s and area is None:
        raise DataError(f"recording shorter than the {cfg.window_s}s window")
    starts, w_samples = _window_starts(rec, cfg, area)
    if len(starts) == 0:
        return []

    chunks = [starts[i: i + WINDOW_CHUNK] for i in range(0, len(starts), WINDOW_CHUNK)]
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            verdicts = list(pool.map(lambda ch: _classify_chunk(rec, model, ch, w_samples), chunks))
    else:
        verdicts = [_classify_chunk(rec, model, ch, w_samples) for ch in chunks]
    positive = np.concatenate(verdicts) == 1

    centers = (starts + w_samples / 2) / rec.fs
    pos_times = centers[positive]
    if len(pos_times) == 0:
        return []

    detections = []
    run_start = float(pos_times[0])
    run_end = float(pos_times[0])
    count = 1
    for t in pos_times[1:]:
        t = float(t)
        if t - run_end < cfg.merge_gap_s:
            run_end = t
            count += 1
        else:
            detections.append(Detection((run_start + run_end) / 2, run_start, run_end, count))
            run_start = run_end = t
            count = 1
    detections.append(Detection((run_start + run_end) / 2, run_start, run_end, count))
    return detections


def sample_non_events(rec: RawRecording, gt: GroundTruth, count: int, cfg: DetectorConfig,
                      intervals: list[tuple[float, float]] | None = None) -> list[float]:
    """Uniformly random window centers far from every labeled event.

    Centers keep window_s/2 clear of the interval edges and at least
    non_event_min_dist_s from every ground-truth label; deterministic for a
    fixed cfg.rng_seed.
    """
    if intervals is None:
        intervals = [(0.0, rec.duration_s)]
    half = cfg.window_s / 2
    admissible = [(a + half, b - half) for a, b in intervals if (b - a) > cfg.window_s]
    if not admissible:
        raise DataError("no interval is long enough to hold a window")
    lengths = np.array([b - a for a, b in admissible])
    cum = np.cumsum(lengths)
    total = cum[-1]

    label_times = gt.times()
    rng = np.random.default_rng(cfg.rng_seed)
    centers: list[float] = []
    tries = 0
    max_tries = 1000 * max(count, 1) + 10000
    while len(centers) < count:
        if tries >= max_tries:
            raise DataError(
                f"could not sample {count} non-event centers >= {cfg.non_event_min_dist_s}s "
                "from all labels; admissible area too small"
            )
        u = rng.uniform(0.0, total)
        idx = int(np.searchsorted(cum, u, side="right"))
        a, _ = admissible[idx]
        t = a + (u - (cum[idx] - lengths[idx]))
        if len(label_times) == 0 or np.min(np.abs(label_times - t)) >= cfg.non_event_min_dist_s:
            centers.append(float(t))
        tries += 1
    return centers


def detections_to_csv(detections: list[Detection], path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["time_s", "first_s", "last_s", "window_count"])
        for d in detections:
            writer.writerow([repr(d.time_s), repr(d.first_s), repr(d.last_s), d.window_count])


def detections_from_csv(path: str | Path) -> list[Detection]:
    out = []
    with open(path, newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            out.append(Detection(
                time_s=float(row["time_s"]),
                first_s=float(row["first_s"]),
                last_s=float(row["last_s"]),
                window_count=int(row["window_count"]),
            ))
    return out
