"""Label binarization, participant-independent splitting, and window segmentation."""
from __future__ import annotations

from collections import Counter, defaultdict
from dataclasses import dataclass

import numpy as np

from stressseq.core.rng import derived_rng
from stressseq.core.types import (
    BinarizationRule,
    Dataset,
    DegenerateParticipantError,
    SequenceWindow,
    Split,
)


def binarize(raw_levels, rule: BinarizationRule):
    """Binarize (participant_id, raw_level) pairs under ``rule``.

    Returns (labels, class_counts). The zscore rule compares each level to
    the participant's own mean level (at-or-below mean -> 0) and requires at
    least two distinct levels per participant.
    """
    raw_levels = list(raw_levels)
    if not raw_levels:
        raise ValueError("raw_levels must be non-empty")
    if rule.kind == "threshold":
        labels = [0 if level <= rule.threshold else 1 for _, level in raw_levels]
    else:
        by_participant = defaultdict(list)
        for pid, level in raw_levels:
            by_participant[pid].append(level)
        means = {}
        for pid, levels in by_participant.items():
            if len(set(levels)) < 2:
                raise DegenerateParticipantError(
                    f"participant {pid!r} has a constant stress level; "
                    "per-participant z-scoring is undefined"
                )
            means[pid] = float(np.mean(levels))
        labels = [0 if level <= means[pid] else 1 for pid, level in raw_levels]
    counts = Counter(labels)
    return labels, {0: counts.get(0, 0), 1: counts.get(1, 0)}


def make_splits(dataset: Dataset, fold_count: int, seed: int) -> Split:
    """Participant-level folds: seeded shuffle, then round-robin dealing."""
    if fold_count < 2:
        raise ValueError("fold_count must be >= 2")
    participants = dataset.participants()
    return make_splits_for_participants(participants, fold_count, seed)


def make_splits_for_participants(participants, fold_count: int, seed: int) -> Split:
    participants = sorted(participants)
    if len(participants) < fold_count:
        raise ValueError(
            f"need at least {fold_count} participants for {fold_count} folds, "
            f"got {len(participants)}"
        )
    rng = derived_rng(seed, "split")
    order = list(rng.permutation(len(participants)))
    assignments = {
        participants[p]: i % fold_count for i, p in enumerate(order)
    }
    return Split(fold_count=fold_count, assignments=assignments)


@dataclass(frozen=True)
class SegmentReport:
    windows_kept: int
    labeled_kept: int
    dropped_incomplete: int
    dropped_label_collisions: int


def segment(
    streams: dict,
    length: int,
    resolution_minutes: float,
    label_times=(),
    feature_names=None,
    binarization: BinarizationRule | None = None,
) -> tuple:
    """Cut per-participant feature streams into fixed-length windows.

    ``streams`` maps participant_id -> list of (timestamp_seconds, row) with
    strictly increasing timestamps; rows are length-F sequences. A step is
    missing when no row exists at its slot or the row contains a non-finite
    value; windows touching a missing step are dropped and counted.

    ``label_times`` is a list of (participant_id, timestamp_seconds, label,
    raw_level). A labeled window ends at the last stream row at or before the
    label timestamp; unlabeled windows slide with stride one step over every
    other complete end position.

    Returns (Dataset, SegmentReport). Output order is deterministic: sorted
    by participant_id, then window end time.
    """
    step = int(round(resolution_minutes * 60))
    if step <= 0:
        raise ValueError("resolution must be positive")
    if length < 1:
        raise ValueError("length must be >= 1")

    rows_by_participant = {}
    n_features = None
    for pid in sorted(streams):
        entries = streams[pid]
        times = [int(t) for t, _ in entries]
        if any(b <= a for a, b in zip(times, times[1:])):
            raise ValueError(f"timestamps for participant {pid!r} must be strictly increasing")
        table = {}
        for t, row in entries:
            row = np.asarray(row, dtype=np.float64)
            if n_features is None:
                n_features = row.shape[0]
            if row.shape != (n_features,):
                raise ValueError("all stream rows must share one feature count")
            if np.all(np.isfinite(row)):
                table[int(t)] = row
        rows_by_participant[pid] = table

    labels_by_end = {}
    collisions = 0
    for pid, t_label, label, raw_level in sorted(label_times, key=lambda x: (x[0], x[1])):
        table = rows_by_participant.get(pid)
        if not table:
            continue
        candidates = [t for t in table if t <= int(t_label)]
        if not candidates:
            continue
        t_end = max(candidates)
        key = (pid, t_end)
        if key in labels_by_end:
            collisions += 1
            continue
        labels_by_end[key] = (int(label), None if raw_level is None else int(raw_level))

    windows = []
    dropped = 0
    labeled_kept = 0
    for pid in sorted(rows_by_participant):
        table = rows_by_participant[pid]
        if not table:
            continue
        t_first = min(table)
        for t_end in sorted(table):
            if t_end - (length - 1) * step < t_first:
                continue  # stream span before this row is too short for a window
            step_times = [t_end - k * step for k in range(length - 1, -1, -1)]
            if not all(t in table for t in step_times):
                dropped += 1
                continue
            feats = np.stack([table[t] for t in step_times])
            label_entry = labels_by_end.get((pid, t_end))
            if label_entry is not None:
                label, raw_level = label_entry
                labeled_kept += 1
            else:
                label, raw_level = None, None
            windows.append(
                SequenceWindow(
                    participant_id=pid,
                    t_end=t_end,
                    features=feats,
                    label=label,
                    raw_level=raw_level,
                )
            )

    if feature_names is None:
        feature_names = [f"f{i}" for i in range(n_features or 0)]
    dataset = Dataset(
        windows=tuple(windows),
        feature_names=tuple(feature_names),
        step_resolution=resolution_minutes,
        binarization=binarization,
    )
    report = SegmentReport(
        windows_kept=len(windows),
        labeled_kept=labeled_kept,
        dropped_incomplete=dropped,
        dropped_label_collisions=collisions,
    )
    return dataset, report
