"""On-disk dataset format and CSV ingestion.

A dataset directory holds:
  meta.json    feature names, T, F, step resolution, binarization rule
  windows.bin  row-major little-endian float64 window matrices, in index order
  index.csv    window id, participant, t_end (ISO-8601 UTC), label, raw_level
"""
from __future__ import annotations

import csv
import json
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from stressseq.core.types import BinarizationRule, Dataset, SequenceWindow

META_NAME = "meta.json"
BLOB_NAME = "windows.bin"
INDEX_NAME = "index.csv"


def iso_utc(t: int) -> str:
    return datetime.fromtimestamp(int(t), tz=timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


def parse_timestamp(text: str) -> int:
    """ISO-8601 UTC (or epoch seconds) -> integer UNIX seconds."""
    text = text.strip()
    if not text:
        raise ValueError("empty timestamp")
    try:
        return int(text)
    except ValueError:
        pass
    if text.endswith("Z"):
        text = text[:-1] + "+00:00"
    dt = datetime.fromisoformat(text)
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    return int(dt.timestamp())


def save_dataset(dataset: Dataset, out_dir) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    meta = {
        "feature_names": list(dataset.feature_names),
        "steps": dataset.steps,
        "n_features": dataset.n_features,
        "step_resolution_minutes": dataset.step_resolution,
        "binarization": dataset.binarization.to_dict() if dataset.binarization else None,
        "window_count": len(dataset.windows),
    }
    (out / META_NAME).write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
    with open(out / BLOB_NAME, "wb") as blob:
        for w in dataset.windows:
            blob.write(np.ascontiguousarray(w.features, dtype="<f8").tobytes())
    with open(out / INDEX_NAME, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["window_id", "participant_id", "t_end", "label", "raw_level"])
        for i, w in enumerate(dataset.windows):
            writer.writerow(
                [
                    i,
                    w.participant_id,
                    iso_utc(w.t_end),
                    "" if w.label is None else w.label,
                    "" if w.raw_level is None else w.raw_level,
                ]
            )


def load_dataset(in_dir) -> Dataset:
    src = Path(in_dir)
    meta = json.loads((src / META_NAME).read_text())
    steps = int(meta["steps"])
    n_features = int(meta["n_features"])
    rule = meta.get("binarization")
    binarization = BinarizationRule.from_dict(rule) if rule else None

    raw = np.fromfile(src / BLOB_NAME, dtype="<f8")
    count = int(meta["window_count"])
    if raw.size != count * steps * n_features:
        raise ValueError(
            f"windows.bin holds {raw.size} values, expected {count * steps * n_features}"
        )
    matrices = raw.reshape(count, steps, n_features) if count else raw.reshape(0, steps, n_features)

    windows = []
    with open(src / INDEX_NAME, newline="") as fh:
        reader = csv.DictReader(fh)
        for row in reader:
            i = int(row["window_id"])
            label = row["label"]
            raw_level = row["raw_level"]
            windows.append(
                SequenceWindow(
                    participant_id=row["participant_id"],
                    t_end=parse_timestamp(row["t_end"]),
                    features=matrices[i],
                    label=None if label == "" else int(label),
                    raw_level=None if raw_level == "" else int(raw_level),
                )
            )
    if len(windows) != count:
        raise ValueError(f"index.csv lists {len(windows)} windows, meta says {count}")
    return Dataset(
        windows=tuple(windows),
        feature_names=tuple(meta["feature_names"]),
        step_resolution=float(meta["step_resolution_minutes"]),
        binarization=binarization,
    )


def read_stream_csv(path) -> tuple:
    """Feature stream CSV: participant_id,timestamp,<feature_1>,...,<feature_F>.

    Returns (streams dict for segment(), feature_names).
    """
    streams: dict = {}
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header[:2] != ["participant_id", "timestamp"]:
            raise ValueError(
                "stream CSV must start with participant_id,timestamp columns"
            )
        feature_names = header[2:]
        for row in reader:
            if not row:
                continue
            pid = row[0]
            t = parse_timestamp(row[1])
            values = [float(v) if v.strip() != "" else float("nan") for v in row[2:]]
            streams.setdefault(pid, []).append((t, values))
    for pid in streams:
        streams[pid].sort(key=lambda x: x[0])
    return streams, feature_names


def read_label_csv(path) -> list:
    """Label CSV: participant_id,timestamp,raw_level -> [(pid, t, raw_level)]."""
    out = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        required = {"participant_id", "timestamp", "raw_level"}
        if not required.issubset(set(reader.fieldnames or ())):
            raise ValueError("label CSV must have participant_id,timestamp,raw_level")
        for row in reader:
            out.append(
                (
                    row["participant_id"],
                    parse_timestamp(row["timestamp"]),
                    int(row["raw_level"]),
                )
            )
    return out
