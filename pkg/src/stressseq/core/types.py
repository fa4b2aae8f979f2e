"""Domain types shared by the whole pipeline.

All types are immutable after construction (arrays are marked read-only)
and safe to share across threads.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

NON_STRESSED = 0
STRESSED = 1


class DegenerateParticipantError(ValueError):
    """Raised when a per-participant rule cannot be applied to a participant."""


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.asarray(a, dtype=np.float64)
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class BinarizationRule:
    """Maps raw self-report levels to binary stress labels.

    kind="threshold": raw_level <= threshold -> 0, else 1.
    kind="per_participant_zscore": level at or below the participant's mean
    level -> 0, above -> 1.
    """

    kind: str = "threshold"
    threshold: int = 1

    def __post_init__(self):
        if self.kind not in ("threshold", "per_participant_zscore"):
            raise ValueError(f"unknown binarization kind: {self.kind!r}")

    def to_dict(self) -> dict:
        return {"kind": self.kind, "threshold": self.threshold}

    @classmethod
    def from_dict(cls, d: dict) -> "BinarizationRule":
        return cls(kind=d["kind"], threshold=int(d.get("threshold", 1)))


@dataclass(frozen=True)
class SequenceWindow:
    """One fixed-length T x F feature matrix for a participant, optionally labeled."""

    participant_id: str
    t_end: int  # UTC seconds
    features: np.ndarray  # (T, F) float64, no missing values
    label: int | None = None
    raw_level: int | None = None

    def __post_init__(self):
        feats = np.asarray(self.features, dtype=np.float64)
        if feats.ndim != 2:
            raise ValueError("features must be a T x F matrix")
        if not np.all(np.isfinite(feats)):
            raise ValueError(
                f"window {self.participant_id}@{self.t_end} contains missing values"
            )
        object.__setattr__(self, "features", _readonly(feats))
        if self.raw_level is not None and self.label is None:
            raise ValueError("raw_level present requires label present")
        if self.label is not None and self.label not in (NON_STRESSED, STRESSED):
            raise ValueError(f"label must be 0 or 1, got {self.label}")

    @property
    def steps(self) -> int:
        return self.features.shape[0]

    @property
    def is_labeled(self) -> bool:
        return self.label is not None


@dataclass(frozen=True)
class Dataset:
    """Participant-keyed window collection with a labeled/unlabeled partition."""

    windows: tuple
    feature_names: tuple
    step_resolution: float  # minutes per step
    binarization: BinarizationRule | None = None
    labeled_index: tuple = field(default=())
    unlabeled_index: tuple = field(default=())

    def __post_init__(self):
        windows = tuple(self.windows)
        object.__setattr__(self, "windows", windows)
        object.__setattr__(self, "feature_names", tuple(self.feature_names))
        object.__setattr__(self, "step_resolution", float(self.step_resolution))
        labeled = tuple(i for i, w in enumerate(windows) if w.is_labeled)
        unlabeled = tuple(i for i, w in enumerate(windows) if not w.is_labeled)
        object.__setattr__(self, "labeled_index", labeled)
        object.__setattr__(self, "unlabeled_index", unlabeled)
        if windows:
            t = windows[0].features.shape
            for w in windows:
                if w.features.shape != t:
                    raise ValueError("all windows in a Dataset must share T x F")
            if t[1] != len(self.feature_names):
                raise ValueError("feature_names length must equal F")

    @property
    def steps(self) -> int:
        return self.windows[0].features.shape[0] if self.windows else 0

    @property
    def n_features(self) -> int:
        return len(self.feature_names)

    def participants(self) -> list:
        return sorted({w.participant_id for w in self.windows})

    def labeled_windows(self) -> list:
        return [self.windows[i] for i in self.labeled_index]

    def unlabeled_windows(self) -> list:
        return [self.windows[i] for i in self.unlabeled_index]

    def stack(self, indices=None) -> np.ndarray:
        """(N, T, F) array of the selected windows (all windows by default)."""
        if indices is None:
            indices = range(len(self.windows))
        if not self.windows:
            return np.zeros((0, 0, 0))
        return np.stack([self.windows[i].features for i in indices])

    def subset(self, indices) -> "Dataset":
        return Dataset(
            windows=tuple(self.windows[i] for i in indices),
            feature_names=self.feature_names,
            step_resolution=self.step_resolution,
            binarization=self.binarization,
        )


@dataclass(frozen=True)
class Split:
    """Participant-independent fold assignment."""

    fold_count: int
    assignments: dict  # participant_id -> fold index

    def __post_init__(self):
        object.__setattr__(self, "assignments", dict(self.assignments))
        folds = set(self.assignments.values())
        if folds and (min(folds) < 0 or max(folds) >= self.fold_count):
            raise ValueError("fold indices out of range")

    def fold_participants(self, fold: int) -> list:
        return sorted(p for p, f in self.assignments.items() if f == fold)

    def train_participants(self, fold: int) -> list:
        return sorted(p for p, f in self.assignments.items() if f != fold)

    def train_val_indices(self, dataset: Dataset, fold: int):
        """Window indices for the training and validation side of ``fold``."""
        val = set(self.fold_participants(fold))
        train_idx = [
            i for i, w in enumerate(dataset.windows) if w.participant_id not in val
        ]
        val_idx = [
            i for i, w in enumerate(dataset.windows) if w.participant_id in val
        ]
        return train_idx, val_idx
