"""Synthetic wearable-like dataset generator.

Each participant gets a per-feature AR(1) baseline around a participant-
specific offset (inter-participant covariate shift). Every in-distribution
window draws a latent stress state; stressed windows carry a planted
signature (a linear ramp over the final third of the window in a designated
feature subset, scaled by ``signal_strength``), and the exact
``label_fraction`` of windows, spread over participants round-robin, expose
that state as a label. The rest stay unlabeled, so the unlabeled pool is
the labeled distribution with labels merely unreported. A configurable
share of the unlabeled pool is instead drawn from a mean-shifted regime
(the out-of-distribution contaminant that active selection should reject).

The signature can vary from window to window (lognormal amplitude factor
and onset jitter in steps), mirroring how response magnitude and timing
differ between stress episodes; both default to zero.
"""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from stressseq.core.rng import derived_rng
from stressseq.core.types import BinarizationRule, Dataset, SequenceWindow

_T0 = 1_600_000_000  # arbitrary fixed epoch anchor for window timestamps


@dataclass(frozen=True)
class SynthSpec:
    participants: int = 12
    windows_per_participant: int = 40
    steps: int = 30
    n_features: int = 6
    label_fraction: float = 0.05
    signal_strength: float = 1.0
    contaminant_fraction: float = 0.0
    noise_floor: float = 0.5
    seed: int = 0
    stress_prevalence: float = 0.5
    ar_coefficient: float = 0.8
    participant_shift: float = 0.5
    signal_features: int = 2
    signature_amplitude_jitter: float = 0.0  # lognormal sigma, per window
    signature_onset_jitter: int = 0  # uniform +/- steps, per window
    contaminant_shift: float = 4.0
    resolution_minutes: float = 5.0

    def __post_init__(self):
        for name in ("label_fraction", "contaminant_fraction", "stress_prevalence"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1]")
        if self.signal_strength < 0:
            raise ValueError("signal_strength must be >= 0")
        if self.signal_features > self.n_features:
            raise ValueError("signal_features cannot exceed n_features")

    def to_dict(self) -> dict:
        return {f: getattr(self, f) for f in self.__dataclass_fields__}  # type: ignore[attr-defined]

    @classmethod
    def from_dict(cls, d: dict) -> "SynthSpec":
        known = set(cls.__dataclass_fields__)  # type: ignore[attr-defined]
        return cls(**{k: v for k, v in d.items() if k in known})

    def with_seed(self, seed: int) -> "SynthSpec":
        return replace(self, seed=seed)


def _ar1_window(rng, spec: SynthSpec, offset: np.ndarray) -> np.ndarray:
    noise = rng.standard_normal((spec.steps, spec.n_features)) * spec.noise_floor
    out = np.empty((spec.steps, spec.n_features))
    out[0] = offset + noise[0]
    for t in range(1, spec.steps):
        out[t] = offset + spec.ar_coefficient * (out[t - 1] - offset) + noise[t]
    return out


def _plant_signature(
    window: np.ndarray, spec: SynthSpec, amplitude: float, onset_shift: int
) -> np.ndarray:
    ramp_len = int(np.ceil(spec.steps / 3))
    ramp = amplitude * np.arange(1, ramp_len + 1) / ramp_len
    out = window.copy()
    start = spec.steps - ramp_len + onset_shift
    start = max(0, min(start, spec.steps - 1))
    end = min(spec.steps, start + ramp_len)
    out[start:end, : spec.signal_features] += ramp[: end - start, None]
    return out


def generate(spec: SynthSpec) -> Dataset:
    """Build a Dataset satisfying every core invariant, deterministic in
    spec.seed.

    The feature stream and latent stress states never depend on which
    windows expose labels, so two specs differing only in label_fraction
    produce identical windows with different label coverage (the bench uses
    a fully-labeled view of the same process for precise evaluation).
    """
    rule = BinarizationRule(kind="threshold", threshold=1)
    pids = [f"sp{p:03d}" for p in range(spec.participants)]
    step_seconds = int(spec.resolution_minutes * 60)

    # First pass: features, contamination, and latent stress states.
    per_window = {}  # (pid, w) -> (features, stressed or None for contaminant)
    for pid in pids:
        rng = derived_rng(spec.seed, "participant", pid)
        offset = rng.standard_normal(spec.n_features) * spec.participant_shift
        for w in range(spec.windows_per_participant):
            feats = _ar1_window(rng, spec, offset)
            contaminant_draw = rng.random()
            stressed = bool(rng.random() < spec.stress_prevalence)
            amplitude = spec.signal_strength
            if spec.signature_amplitude_jitter > 0:
                amplitude *= float(
                    np.exp(rng.normal(0.0, spec.signature_amplitude_jitter))
                )
            shift = 0
            if spec.signature_onset_jitter > 0:
                shift = int(
                    rng.integers(
                        -spec.signature_onset_jitter, spec.signature_onset_jitter + 1
                    )
                )
            if spec.contaminant_fraction > 0 and contaminant_draw < spec.contaminant_fraction:
                per_window[(pid, w)] = (feats + spec.contaminant_shift, None)
            else:
                if stressed:
                    feats = _plant_signature(feats, spec, amplitude, shift)
                per_window[(pid, w)] = (feats, stressed)

    # Second pass: deal labeled slots round-robin over participants, drawing
    # window positions per participant and skipping contaminants.
    total = spec.participants * spec.windows_per_participant
    n_labeled = int(round(spec.label_fraction * total))
    available = {
        pid: [
            int(w)
            for w in derived_rng(spec.seed, "slots", pid).permutation(
                spec.windows_per_participant
            )
            if per_window[(pid, w)][1] is not None
        ]
        for pid in pids
    }
    labeled_slots = set()
    cursor = 0
    stalled = 0
    while len(labeled_slots) < n_labeled and stalled < len(pids):
        pid = pids[cursor % len(pids)]
        cursor += 1
        if available[pid]:
            labeled_slots.add((pid, available[pid].pop()))
            stalled = 0
        else:
            stalled += 1

    windows = []
    for pid in pids:
        label_rng = derived_rng(spec.seed, "labels", pid)
        for w in range(spec.windows_per_participant):
            feats, stressed = per_window[(pid, w)]
            label = None
            raw_level = None
            if (pid, w) in labeled_slots:
                if stressed:
                    label, raw_level = 1, int(label_rng.integers(2, 8))
                else:
                    label, raw_level = 0, 1
            windows.append(
                SequenceWindow(
                    participant_id=pid,
                    t_end=_T0 + (w + 1) * spec.steps * step_seconds,
                    features=feats,
                    label=label,
                    raw_level=raw_level,
                )
            )

    windows.sort(key=lambda win: (win.participant_id, win.t_end))
    return Dataset(
        windows=tuple(windows),
        feature_names=tuple(f"f{i}" for i in range(spec.n_features)),
        step_resolution=spec.resolution_minutes,
        binarization=rule,
    )
