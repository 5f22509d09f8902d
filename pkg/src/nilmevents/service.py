"""HTTP backing for the annotation UI.

Serves downsampled per-period RMS power (min/max/mean buckets) for zoomable
plots and persists human-entered event labels in an append-only JSONL log.
Stored label times are never quantized; only the display series is.
"""

from __future__ import annotations

import json
import threading
import time
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np
from fastapi import FastAPI, HTTPException, Query
from pydantic import BaseModel

from nilmevents.errors import DataError
from nilmevents.io import EVENT_KINDS, EventLabel, GroundTruth, load_recording, power_envelope


@dataclass
class AnnotationRecord:
    id: int
    time_s: float
    channel_id: str
    appliance: str
    kind: str
    annotator: str
    created_at: float
    revision: int
    deleted: bool = False


class AnnotationStore:
    """Append-only annotation log; state is rebuilt by replaying the file.

    Writers are serialized by a lock; every mutation appends one JSON line and
    flushes, so replaying the log after a crash reconstructs the exact state.
    """

    def __init__(self, path: str | Path):
        self.path = Path(path)
        self._lock = threading.Lock()
        self._records: dict[int, AnnotationRecord] = {}
        self._next_id = 1
        if self.path.exists():
            self._replay()
        else:
            self.path.touch()

    def _replay(self) -> None:
        with open(self.path, encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                rec = AnnotationRecord(**json.loads(line))
                self._records[rec.id] = rec
                self._next_id = max(self._next_id, rec.id + 1)

    def _append(self, rec: AnnotationRecord) -> None:
        with open(self.path, "a", encoding="utf-8") as fh:
            fh.write(json.dumps(asdict(rec)) + "\n")
            fh.flush()

    def put(self, time_s: float, channel_id: str, appliance: str, kind: str,
            annotator: str, record_id: int | None = None,
            expected_revision: int | None = None) -> AnnotationRecord:
        if kind not in EVENT_KINDS:
            raise DataError(f"kind must be one of {EVENT_KINDS}")
        with self._lock:
            if record_id is None:
                rec = AnnotationRecord(
                    id=self._next_id, time_s=time_s, channel_id=channel_id,
                    appliance=appliance, kind=kind, annotator=annotator,
                    created_at=time.time(), revision=1,
                )
                self._next_id += 1
            else:
                current = self._records.get(record_id)
                if current is None:
                    raise KeyError(record_id)
                if expected_revision is not None and expected_revision != current.revision:
                    raise RevisionConflict(
                        f"record {record_id} is at revision {current.revision}, "
                        f"client expected {expected_revision}"
                    )
                rec = AnnotationRecord(
                    id=record_id, time_s=time_s, channel_id=channel_id,
                    appliance=appliance, kind=kind, annotator=annotator,
                    created_at=time.time(), revision=current.revision + 1,
                )
            self._records[rec.id] = rec
            self._append(rec)
            return rec

    def delete(self, record_id: int) -> None:
        with self._lock:
            current = self._records.get(record_id)
            if current is None or current.deleted:
                raise KeyError(record_id)
            rec = AnnotationRecord(
                id=record_id, time_s=current.time_s, channel_id=current.channel_id,
                appliance=current.appliance, kind=current.kind, annotator=current.annotator,
                created_at=time.time(), revision=current.revision + 1, deleted=True,
            )
            self._records[rec.id] = rec
            self._append(rec)

    def list(self, channel_id: str | None = None, t0: float | None = None,
             t1: float | None = None) -> list[AnnotationRecord]:
        out = [r for r in self._records.values() if not r.deleted]
        if channel_id is not None:
            out = [r for r in out if r.channel_id == channel_id]
        if t0 is not None:
            out = [r for r in out if r.time_s >= t0]
        if t1 is not None:
            out = [r for r in out if r.time_s < t1]
        return sorted(out, key=lambda r: (r.time_s, r.id))

    def to_ground_truth(self) -> GroundTruth:
        return GroundTruth([
            EventLabel(r.time_s, r.channel_id, r.appliance, r.kind) for r in self.list()
        ])


class RevisionConflict(Exception):
    pass


class _Dataset:
    """Lazy per-channel recordings plus cached power envelopes."""

    def __init__(self, data_dir: str | Path):
        self.data_dir = Path(data_dir)
        self._channels: dict[str, dict] = {}
        self._envelopes: dict[str, np.ndarray] = {}
        self._lock = threading.Lock()
        for manifest in sorted(self.data_dir.glob("*.manifest.json")):
            meta = json.loads(manifest.read_text(encoding="utf-8"))
            payload = manifest.with_name(manifest.name.replace(".manifest.json", ".f32"))
            channel = str(meta.get("channel_id", manifest.stem))
            self._channels[channel] = {
                "manifest": manifest,
                "payload": payload,
                "fs": int(meta["fs"]),
                "F0": int(meta["F0"]),
                "start_time": float(meta.get("start_time", 0.0)),
                "duration_s": int(meta["n_samples"]) / int(meta["fs"]),
            }
        if not self._channels:
            raise DataError(f"no *.manifest.json files under {self.data_dir}")

    def channels(self) -> list[dict]:
        return [
            {"channel_id": cid, "fs": c["fs"], "F0": c["F0"],
             "duration_s": c["duration_s"], "start_time": c["start_time"]}
            for cid, c in sorted(self._channels.items())
        ]

    def channel(self, channel_id: str) -> dict:
        if channel_id not in self._channels:
            raise KeyError(channel_id)
        return self._channels[channel_id]

    def envelope(self, channel_id: str) -> np.ndarray:
        with self._lock:
            if channel_id not in self._envelopes:
                c = self.channel(channel_id)
                rec = load_recording(c["payload"], c["manifest"])
                self._envelopes[channel_id] = power_envelope(rec)
            return self._envelopes[channel_id]


class AnnotationBody(BaseModel):
    time_s: float
    channel_id: str
    appliance: str = ""
    kind: str
    annotator: str = "anonymous"
    id: int | None = None
    revision: int | None = None


def create_app(data_dir: str | Path, store_path: str | Path) -> FastAPI:
    dataset = _Dataset(data_dir)
    store_path = Path(store_path)
    if store_path.exists():
        import os
        if not os.access(store_path, os.W_OK):
            raise DataError(f"annotation store {store_path} is not writable")
    store = AnnotationStore(store_path)
    app = FastAPI(title="nilmevents annotation service")
    app.state.store = store
    app.state.dataset = dataset

    @app.get("/health")
    def health():
        return {"status": "ok"}

    @app.get("/channels")
    def channels():
        return dataset.channels()

    @app.get("/series")
    def series(channel: str, start: float, end: float, max_points: int = Query(2000, ge=2)):
        try:
            info = dataset.channel(channel)
        except KeyError:
            raise HTTPException(status_code=404, detail=f"unknown channel {channel!r}")
        if end <= start:
            raise HTTPException(status_code=400, detail="empty or inverted range")
        if start < 0 or end > info["duration_s"]:
            raise HTTPException(status_code=400, detail="range outside recording")
        env = dataset.envelope(channel)
        f0 = info["F0"]
        p0 = int(np.floor(start * f0))
        p1 = min(int(np.ceil(end * f0)), len(env))
        n = p1 - p0
        bucket = max(1, -(-n // max_points))  # ceil division
        points = []
        for k in range(p0, p1, bucket):
            chunk = env[k: min(k + bucket, p1)]
            points.append([float(chunk.min()), float(chunk.max()), float(chunk.mean())])
        return {
            "channel_id": channel,
            "t0_s": p0 / f0,
            "dt_s": bucket / f0,
            "points": points,
        }

    @app.get("/annotations")
    def list_annotations(channel: str | None = None, start: float | None = None,
                         end: float | None = None):
        return {"annotations": [asdict(r) for r in store.list(channel, start, end)]}

    @app.put("/annotations")
    def put_annotation(body: AnnotationBody):
        try:
            info = dataset.channel(body.channel_id)
        except KeyError:
            raise HTTPException(status_code=404, detail=f"unknown channel {body.channel_id!r}")
        if not 0.0 <= body.time_s <= info["duration_s"]:
            raise HTTPException(status_code=400, detail="label time outside recording")
        try:
            rec = store.put(
                body.time_s, body.channel_id, body.appliance, body.kind,
                body.annotator, record_id=body.id, expected_revision=body.revision,
            )
        except RevisionConflict as exc:
            raise HTTPException(status_code=409, detail=str(exc))
        except KeyError:
            raise HTTPException(status_code=404, detail=f"unknown annotation id {body.id}")
        except DataError as exc:
            raise HTTPException(status_code=400, detail=str(exc))
        return asdict(rec)

    @app.delete("/annotations")
    def delete_annotation(id: int):
        try:
            store.delete(id)
        except KeyError:
            raise HTTPException(status_code=404, detail=f"unknown annotation id {id}")
        return {"deleted": id}

    @app.get("/export.csv")
    def export_csv():
        from fastapi.responses import PlainTextResponse

        lines = ["time_s,channel_id,appliance,kind"]
        for r in store.list():
            lines.append(f"{r.time_s!r},{r.channel_id},{r.appliance},{r.kind}")
        return PlainTextResponse("\n".join(lines) + "\n", media_type="text/csv")

    return app
