"""Windowed feature extraction: raw sensor CSVs -> per-step feature rows.

Step timestamps lie on an epoch-anchored grid (multiples of the resolution);
the step at time t covers the raw data in (t - resolution, t]. Steps whose
sources cannot produce a value (insufficient data) are omitted, which the
segmenter later treats as missing.

Feature groups are selected by name, so any subset of the registry can form
a dataset's feature vector; the per-dataset feature counts in the source
studies are not reconstructable exactly and are left config-driven.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from stressseq.core.store import parse_timestamp
from stressseq.features.eda import SC_FEATURE_NAMES, ScSeries, sc_features
from stressseq.features.hrv import (
    FREQ_FEATURE_NAMES,
    TIME_FEATURE_NAMES,
    InsufficientDataError,
    RrSeries,
    hrv_freq_features,
    hrv_time_features,
)
from stressseq.features.phone import PHONE_FEATURE_NAMES, PhoneEventLog, phone_features

FEATURE_GROUPS = {
    "hrv_time": TIME_FEATURE_NAMES,
    "hrv_freq": FREQ_FEATURE_NAMES,
    "sc": SC_FEATURE_NAMES,
    "phone": PHONE_FEATURE_NAMES,
}


@dataclass
class RawInputs:
    """Per-participant raw series for one extraction run."""

    rr: dict | None = None  # pid -> (times s, intervals ms) arrays
    sc: dict | None = None  # pid -> (times s, values uS) arrays
    sc_sample_rate: float | None = None
    phone: dict | None = None  # pid -> PhoneEventLog
    app_categories: dict | None = None

    def participants(self):
        pids = set()
        for source in (self.rr, self.sc, self.phone):
            if source:
                pids.update(source.keys())
        return sorted(pids)


def read_rr_csv(path) -> dict:
    """CSV participant_id,timestamp,rr_ms -> pid -> (times, intervals)."""
    rows: dict = {}
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        for row in reader:
            rows.setdefault(row["participant_id"], []).append(
                (parse_timestamp(row["timestamp"]), float(row["rr_ms"]))
            )
    out = {}
    for pid, entries in rows.items():
        entries.sort(key=lambda x: x[0])
        times = np.array([t for t, _ in entries], dtype=np.float64)
        intervals = np.array([v for _, v in entries], dtype=np.float64)
        out[pid] = (times, intervals)
    return out


def read_sc_csv(path) -> tuple:
    """SC CSV with a leading metadata line ``# sample_rate_hz=<float>``."""
    sample_rate = None
    rows: dict = {}
    with open(path, newline="") as fh:
        first = fh.readline().strip()
        if first.startswith("#") and "sample_rate_hz" in first:
            sample_rate = float(first.split("=", 1)[1])
        else:
            raise ValueError("SC CSV must start with '# sample_rate_hz=<hz>'")
        reader = csv.DictReader(fh)
        for row in reader:
            rows.setdefault(row["participant_id"], []).append(
                (float(parse_timestamp(row["timestamp"])), float(row["sc_us"]))
            )
    out = {}
    for pid, entries in rows.items():
        entries.sort(key=lambda x: x[0])
        out[pid] = (
            np.array([t for t, _ in entries]),
            np.array([v for _, v in entries]),
        )
    return out, sample_rate


def read_phone_csv(path) -> dict:
    """CSV participant_id,timestamp,kind,field1,field2,field3 -> event logs."""
    rows: dict = {}
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header[:3] != ["participant_id", "timestamp", "kind"]:
            raise ValueError("phone CSV must start with participant_id,timestamp,kind")
        for row in reader:
            if not row:
                continue
            pid, t, kind = row[0], parse_timestamp(row[1]), row[2]
            payload = tuple(v for v in row[3:] if v != "")
            rows.setdefault(pid, []).append((t, kind, payload))
    return {
        pid: PhoneEventLog(events=tuple(sorted(events, key=lambda e: e[0])))
        for pid, events in rows.items()
    }


def _step_grid(t_min: int, t_max: int, step: int):
    first = ((t_min + step - 1) // step) * step + step
    return range(first, t_max + 1, step)


def extract_stream(inputs: RawInputs, groups, resolution_minutes: float) -> tuple:
    """Compute the selected feature groups on the step grid.

    Returns (streams dict for segment(), feature_names). A participant/step
    row appears only when every selected group produced values for it.
    """
    for g in groups:
        if g not in FEATURE_GROUPS:
            raise ValueError(f"unknown feature group {g!r}; known: {sorted(FEATURE_GROUPS)}")
    step = int(round(resolution_minutes * 60))
    feature_names = [name for g in groups for name in FEATURE_GROUPS[g]]

    streams = {}
    for pid in inputs.participants():
        spans = []
        if inputs.rr and pid in inputs.rr:
            spans.append((inputs.rr[pid][0].min(), inputs.rr[pid][0].max()))
        if inputs.sc and pid in inputs.sc:
            spans.append((inputs.sc[pid][0].min(), inputs.sc[pid][0].max()))
        if inputs.phone and pid in inputs.phone and inputs.phone[pid].events:
            events = inputs.phone[pid].events
            spans.append((events[0][0], events[-1][0]))
        if not spans:
            continue
        t_min = int(min(lo for lo, _ in spans))
        t_max = int(max(hi for _, hi in spans))

        rows = []
        for t in _step_grid(t_min, t_max, step):
            record = {}
            ok = True
            for g in groups:
                values = _compute_group(g, inputs, pid, t - step, t)
                if values is None:
                    ok = False
                    break
                record.update(values)
            if ok:
                rows.append((t, [record[name] for name in feature_names]))
        if rows:
            streams[pid] = rows
    return streams, feature_names


def _compute_group(group: str, inputs: RawInputs, pid: str, t_start: int, t_end: int):
    if group in ("hrv_time", "hrv_freq"):
        if not inputs.rr or pid not in inputs.rr:
            return None
        times, intervals = inputs.rr[pid]
        mask = (times > t_start) & (times <= t_end)
        rr = RrSeries.from_raw(intervals[mask])
        try:
            if group == "hrv_time":
                return hrv_time_features(rr)
            return hrv_freq_features(rr)
        except InsufficientDataError:
            return None
    if group == "sc":
        if not inputs.sc or pid not in inputs.sc:
            return None
        times, values = inputs.sc[pid]
        mask = (times > t_start) & (times <= t_end)
        try:
            return sc_features(ScSeries(values[mask], sample_rate=inputs.sc_sample_rate))
        except ValueError:
            return None
    if group == "phone":
        if not inputs.phone or pid not in inputs.phone:
            return None
        return phone_features(
            inputs.phone[pid], (t_start, t_end), app_categories=inputs.app_categories
        )
    raise ValueError(f"unknown group {group!r}")
