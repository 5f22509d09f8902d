"""Load, store, slice, and synthesize waveform recordings and event ground truth.

Container format: a JSON manifest next to a little-endian float32 binary
payload with channel-interleaved samples (voltage, current, voltage, ...).
Ground truth is a UTF-8 CSV with columns time_s,channel_id,appliance,kind.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from nilmevents.errors import DataError

EVENT_KINDS = ("ON", "OFF")

# synthetic generator shape constants (watt-equivalents at nominal voltage)
INRUSH_EXTRA_W = 100.0     # fixed overshoot added on top of every ON step
INRUSH_HOLD_S = 0.4
EVENT_MIN_GAP_S = 12.0     # true-event spacing (spec floor is 10 s)
EVENT_EDGE_MARGIN_S = 10.0
NUISANCE_MAX_EXTENT_S = 20.0
NUISANCE_EVENT_CLEAR_S = 7.0
NUISANCE_MIN_GAP_S = 6.0
NUISANCE_AMP_RANGE_W = (10.0, 120.0)
RECT_WIDTH_RANGE_S = (0.2, 4.0)
RAMP_RISE_RANGE_S = (5.0, 20.0)
VOLTAGE_WOBBLE_FRAC = 0.005
VOLTAGE_WOBBLE_PERIOD_S = 900.0


@dataclass
class RawRecording:
    """Sampled voltage+current channels with sampling rate fs and mains frequency F0."""

    fs: int
    F0: int
    voltage: np.ndarray
    current: np.ndarray
    start_time: float = 0.0
    channel_id: str = "ch0"

    def __post_init__(self) -> None:
        if self.fs <= 0 or self.F0 <= 0:
            raise DataError(f"fs and F0 must be positive, got fs={self.fs}, F0={self.F0}")
        if self.fs % self.F0 != 0:
            raise DataError(
                f"fs={self.fs} is not divisible by F0={self.F0}; samples per period must be integral"
            )
        if len(self.voltage) != len(self.current):
            raise DataError(
                f"channel length mismatch: voltage={len(self.voltage)}, current={len(self.current)}"
            )

    @property
    def samples_per_period(self) -> int:
        return self.fs // self.F0

    @property
    def n_samples(self) -> int:
        return len(self.voltage)

    @property
    def duration_s(self) -> float:
        return self.n_samples / self.fs


@dataclass
class WaveformSegment:
    """A fixed-length window of raw samples, candidate instant at the midpoint."""

    voltage: np.ndarray
    current: np.ndarray
    fs: int
    F0: int

    @property
    def samples_per_period(self) -> int:
        return self.fs // self.F0

    @property
    def n_periods(self) -> int:
        return len(self.current) // self.samples_per_period


@dataclass(frozen=True)
class EventLabel:
    time_s: float
    channel_id: str
    appliance: str
    kind: str  # "ON" | "OFF"

    def __post_init__(self) -> None:
        if self.kind not in EVENT_KINDS:
            raise DataError(f"unknown event kind {self.kind!r}; expected one of {EVENT_KINDS}")


@dataclass
class GroundTruth:
    """Event labels sorted ascending by time, duplicates rejected."""

    labels: list[EventLabel] = field(default_factory=list)

    def __post_init__(self) -> None:
        self.labels = sorted(self.labels, key=lambda l: l.time_s)
        seen = set()
        for l in self.labels:
            key = (l.time_s, l.channel_id)
            if key in seen:
                raise DataError(f"duplicate ground-truth row for time={l.time_s}, channel={l.channel_id}")
            seen.add(key)

    def __len__(self) -> int:
        return len(self.labels)

    def __iter__(self):
        return iter(self.labels)

    def times(self) -> np.ndarray:
        return np.array([l.time_s for l in self.labels], dtype=np.float64)

    def in_range(self, t0: float, t1: float) -> "GroundTruth":
        """Labels with t0 <= time_s < t1."""
        return GroundTruth([l for l in self.labels if t0 <= l.time_s < t1])


@dataclass
class SynthSpec:
    """Desk-scale synthetic benchmark: step events plus SMPS-like nuisance transients."""

    duration_s: float
    n_true_events: int
    n_nuisance_transients: int
    base_load_w: float = 200.0
    event_step_min_w: float = 30.0
    event_step_max_w: float = 75.0
    event_hold_min_s: float = 5.0
    noise_std: float = 2.0
    seed: int = 0
    fs: int = 1000
    F0: int = 50
    mains_v_rms: float = 230.0

    def __post_init__(self) -> None:
        if self.duration_s <= 0:
            raise DataError("duration_s must be positive")
        if self.n_true_events < 0 or self.n_nuisance_transients < 0:
            raise DataError("event and transient counts must be >= 0")
        if self.event_step_max_w < self.event_step_min_w:
            raise DataError("event_step_max_w must be >= event_step_min_w")
        if self.fs % self.F0 != 0:
            raise DataError(f"fs={self.fs} not divisible by F0={self.F0}")
        usable = self.duration_s - 2 * EVENT_EDGE_MARGIN_S
        if self.n_true_events > 0 and usable < (self.n_true_events - 1) * EVENT_MIN_GAP_S:
            raise DataError(
                f"duration {self.duration_s}s cannot hold {self.n_true_events} events "
                f"spaced >= {EVENT_MIN_GAP_S}s"
            )


def store_recording(rec: RawRecording, payload_path: str | Path, manifest_path: str | Path) -> None:
    """Write the interleaved f32le payload and its JSON manifest."""
    payload_path = Path(payload_path)
    manifest_path = Path(manifest_path)
    interleaved = np.empty(rec.n_samples * 2, dtype="<f4")
    interleaved[0::2] = rec.voltage.astype("<f4", copy=False)
    interleaved[1::2] = rec.current.astype("<f4", copy=False)
    payload_path.write_bytes(interleaved.tobytes())
    manifest = {
        "fs": rec.fs,
        "F0": rec.F0,
        "encoding": "f32le",
        "channels": ["voltage", "current"],
        "start_time": rec.start_time,
        "channel_id": rec.channel_id,
        "n_samples": rec.n_samples,
    }
    manifest_path.write_text(json.dumps(manifest, indent=2) + "\n", encoding="utf-8")


def load_recording(path: str | Path, manifest: str | Path) -> RawRecording:
    """Decode a recording from its payload file and JSON manifest."""
    manifest_path = Path(manifest)
    if not manifest_path.exists():
        raise DataError(f"manifest not found: {manifest_path}")
    try:
        meta = json.loads(manifest_path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise DataError(f"ill-formed manifest {manifest_path}: {exc}") from exc
    for key in ("fs", "F0", "encoding", "channels"):
        if key not in meta:
            raise DataError(f"manifest {manifest_path} missing field {key!r}")
    if meta["encoding"] != "f32le":
        raise DataError(f"unsupported encoding {meta['encoding']!r}")
    channels = list(meta["channels"])
    if channels != ["voltage", "current"]:
        raise DataError(f"unsupported channel layout {channels}")
    fs, f0 = int(meta["fs"]), int(meta["F0"])
    if fs <= 0 or f0 <= 0 or fs % f0 != 0:
        raise DataError(f"manifest declares fs={fs}, F0={f0}; fs must be a positive multiple of F0")

    raw = Path(path).read_bytes()
    frame_bytes = 4 * len(channels)
    if len(raw) % frame_bytes != 0:
        raise DataError(
            f"payload {path} has {len(raw)} bytes, not a multiple of the {frame_bytes}-byte frame"
        )
    n_samples = len(raw) // frame_bytes
    if "n_samples" in meta and int(meta["n_samples"]) != n_samples:
        raise DataError(
            f"payload {path} holds {n_samples} samples but manifest declares {meta['n_samples']}"
        )
    flat = np.frombuffer(raw, dtype="<f4")
    return RawRecording(
        fs=fs,
        F0=f0,
        voltage=flat[0::2].copy(),
        current=flat[1::2].copy(),
        start_time=float(meta.get("start_time", 0.0)),
        channel_id=str(meta.get("channel_id", "ch0")),
    )


def store_ground_truth(gt: GroundTruth, path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["time_s", "channel_id", "appliance", "kind"])
        for l in gt.labels:
            writer.writerow([repr(l.time_s), l.channel_id, l.appliance, l.kind])


def load_ground_truth(path: str | Path) -> GroundTruth:
    """Read the event-label CSV; rows come back sorted ascending by time."""
    labels = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            return GroundTruth([])
        required = {"time_s", "channel_id", "appliance", "kind"}
        missing = required - set(reader.fieldnames)
        if missing:
            raise DataError(f"ground truth {path} missing columns {sorted(missing)}")
        for i, row in enumerate(reader):
            try:
                t = float(row["time_s"])
            except (TypeError, ValueError) as exc:
                raise DataError(f"ground truth {path} row {i}: bad time_s {row['time_s']!r}") from exc
            labels.append(EventLabel(t, row["channel_id"], row["appliance"], row["kind"]))
    return GroundTruth(labels)


def slice_segment(rec: RawRecording, center_s: float, window_s: float = 10.0) -> WaveformSegment:
    """Cut a window_s-long segment with the candidate instant at the midpoint."""
    half = int(round(window_s / 2 * rec.fs))
    start = int(round(center_s * rec.fs)) - half
    stop = start + 2 * half
    if start < 0 or stop > rec.n_samples:
        raise DataError(
            f"window [{center_s - window_s / 2:.3f}, {center_s + window_s / 2:.3f}]s "
            f"exceeds recording bounds [0, {rec.duration_s:.3f}]s"
        )
    return WaveformSegment(
        voltage=rec.voltage[start:stop],
        current=rec.current[start:stop],
        fs=rec.fs,
        F0=rec.F0,
    )


def power_envelope(rec: RawRecording) -> np.ndarray:
    """Per-period RMS power U_rms*I_rms over the whole recording (float64)."""
    n = rec.samples_per_period
    n_periods = rec.n_samples // n
    v = rec.voltage[: n_periods * n].astype(np.float64).reshape(n_periods, n)
    c = rec.current[: n_periods * n].astype(np.float64).reshape(n_periods, n)
    u_rms = np.sqrt(np.mean(v * v, axis=1))
    i_rms = np.sqrt(np.mean(c * c, axis=1))
    return u_rms * i_rms


def _place_times(rng: np.random.Generator, count: int, lo: float, hi: float,
                 min_gap: float, grid_hz: int, max_tries: int) -> list[float]:
    """Rejection-sample `count` grid-aligned times in [lo, hi] pairwise >= min_gap apart."""
    times: list[float] = []
    tries = 0
    while len(times) < count:
        if tries >= max_tries:
            raise DataError(f"could not place {count} instants with {min_gap}s spacing in [{lo}, {hi}]s")
        t = round(rng.uniform(lo, hi) * grid_hz) / grid_hz
        if all(abs(t - u) >= min_gap for u in times):
            times.append(t)
        tries += 1
    times.sort()
    return times


def synth_recording(spec: SynthSpec) -> tuple[RawRecording, GroundTruth]:
    """Synthesize a recording plus ground truth, deterministic for a fixed seed.

    True events are sustained load steps (with a fixed inrush overshoot) that
    all enter the ground truth as ON events; appliances stay on, so the base
    level ratchets upward. Nuisance transients are rectangular pulses shorter
    than 5 s or slow sawtooth ramps; they never enter the ground truth and
    their full extent stays clear of every event window.
    """
    rng = np.random.default_rng(spec.seed)
    f0, fs = spec.F0, spec.fs
    n_periods = int(round(spec.duration_s * f0))
    env = np.full(n_periods, spec.base_load_w, dtype=np.float64)

    event_times = _place_times(
        rng, spec.n_true_events,
        EVENT_EDGE_MARGIN_S, spec.duration_s - EVENT_EDGE_MARGIN_S,
        EVENT_MIN_GAP_S, f0, max_tries=1000 * max(spec.n_true_events, 1) + 10000,
    )
    amps = rng.uniform(spec.event_step_min_w, spec.event_step_max_w, spec.n_true_events)
    inrush_periods = int(round(INRUSH_HOLD_S * f0))
    for t, h in zip(event_times, amps):
        p = int(round(t * f0))
        env[p:] += h
        env[p: p + inrush_periods] += INRUSH_EXTRA_W

    # nuisance transients: each one's whole extent kept clear of every event window
    nuisance_starts: list[float] = []
    tries = 0
    max_tries = 1000 * max(spec.n_nuisance_transients, 1) + 10000
    for _ in range(spec.n_nuisance_transients):
        g = rng.uniform(*NUISANCE_AMP_RANGE_W)
        if rng.uniform() < 0.7:
            extent = rng.uniform(*RECT_WIDTH_RANGE_S)
            ramp = False
        else:
            extent = rng.uniform(*RAMP_RISE_RANGE_S)
            ramp = True
        placed = False
        while not placed:
            if tries >= max_tries:
                raise DataError(
                    f"could not place {spec.n_nuisance_transients} nuisance transients; "
                    "increase duration or reduce counts"
                )
            t = rng.uniform(NUISANCE_EVENT_CLEAR_S,
                            spec.duration_s - extent - NUISANCE_EVENT_CLEAR_S)
            tries += 1
            clear_of_events = all(
                t + extent < u - NUISANCE_EVENT_CLEAR_S or t > u + NUISANCE_EVENT_CLEAR_S
                for u in event_times
            )
            if clear_of_events and all(abs(t - v) >= NUISANCE_MIN_GAP_S for v in nuisance_starts):
                nuisance_starts.append(t)
                placed = True
        p0, p1 = int(t * f0), int((t + extent) * f0)
        if ramp:
            env[p0:p1] += g * np.linspace(0.0, 1.0, p1 - p0)
        else:
            env[p0:p1] += g

    if spec.noise_std > 0:
        env += rng.normal(0.0, spec.noise_std, n_periods)
    np.clip(env, 0.0, None, out=env)

    # per-period RMS levels -> waveforms; one sample grid per mains period
    wobble = VOLTAGE_WOBBLE_FRAC * np.sin(
        2 * np.pi * np.arange(n_periods) / (VOLTAGE_WOBBLE_PERIOD_S * f0)
    )
    u_rms = spec.mains_v_rms * (1.0 + wobble)
    i_rms = env / u_rms
    n = fs // f0
    one_period = np.sqrt(2.0) * np.sin(2 * np.pi * np.arange(n) / n)
    voltage = (u_rms[:, None] * one_period[None, :]).reshape(-1).astype(np.float32)
    current = (i_rms[:, None] * one_period[None, :]).reshape(-1).astype(np.float32)

    rec = RawRecording(fs=fs, F0=f0, voltage=voltage, current=current, channel_id="synth0")
    gt = GroundTruth(
        [EventLabel(t, rec.channel_id, f"appliance_{i:03d}", "ON")
         for i, t in enumerate(event_times)]
    )
    return rec, gt
