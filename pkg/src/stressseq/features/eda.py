"""Skin-conductance features and SCR detection.

The phasic component is isolated with a zero-phase band-pass in the
0.16-2.1 Hz band. Responses are found by a trough-to-peak scan on the
phasic signal; amplitude, duration, and area are measured on the raw trace
between the detected onset and half-recovery points.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.signal import butter, sosfiltfilt

PHASIC_BAND = (0.16, 2.1)

SC_FEATURE_NAMES = [
    "sc_level",
    "sc_phasic_power",
    "sc_response_rate",
    "sc_second_diff_power",
    "sc_response_count",
    "sc_magnitude_sum",
    "sc_duration_sum",
    "sc_area_sum",
]


@dataclass(frozen=True)
class ScSeries:
    """Skin conductance in microsiemens sampled at ``sample_rate`` Hz."""

    samples: np.ndarray
    sample_rate: float

    def __post_init__(self):
        s = np.asarray(self.samples, dtype=np.float64)
        object.__setattr__(self, "samples", s)
        if self.sample_rate <= 0:
            raise ValueError("sample_rate must be positive")
        if not np.all(np.isfinite(s)):
            raise ValueError("SC samples must be finite")

    @property
    def duration_seconds(self) -> float:
        return self.samples.size / self.sample_rate


@dataclass(frozen=True)
class ScrDetectorConfig:
    onset_slope: float = 0.01  # microsiemens per second
    amplitude_threshold: float = 0.05  # microsiemens
    filter_order: int = 4


def phasic_component(sc: ScSeries, band=PHASIC_BAND, order: int = 4) -> np.ndarray:
    nyquist = sc.sample_rate / 2.0
    if band[1] >= nyquist:
        raise ValueError(
            f"sample rate {sc.sample_rate} Hz too low; need > {2 * band[1]} Hz "
            f"for the {band[0]}-{band[1]} Hz phasic band"
        )
    sos = butter(order, band, btype="bandpass", fs=sc.sample_rate, output="sos")
    return sosfiltfilt(sos, sc.samples)


def detect_scrs(sc: ScSeries, config: ScrDetectorConfig = ScrDetectorConfig()):
    """Trough-to-peak SCR scan.

    Onset fires where the phasic derivative exceeds ``onset_slope``; the
    response peaks at the next local maximum of the phasic signal; responses
    below ``amplitude_threshold`` (measured on the raw trace) are discarded.
    Duration runs from onset to half-recovery (raw trace falling back to
    onset level plus half the amplitude), truncated at the window edge.

    Returns a list of dicts with onset/peak/recovery indices, amplitude,
    duration (s), and area (microsiemens * s above the onset level).
    """
    phasic = phasic_component(sc, order=config.filter_order)
    raw = sc.samples
    fs = sc.sample_rate
    n = phasic.size
    deriv = np.gradient(phasic) * fs

    responses = []
    i = 1
    while i < n:
        if deriv[i] > config.onset_slope and deriv[i - 1] <= config.onset_slope:
            onset = i - 1
            j = i
            while j < n - 1 and not (phasic[j] >= phasic[j + 1] and phasic[j] > phasic[onset]):
                j += 1
            peak = j
            amplitude = raw[peak] - raw[onset]
            if amplitude >= config.amplitude_threshold:
                half_level = raw[onset] + amplitude / 2.0
                k = peak
                while k < n - 1 and raw[k] > half_level:
                    k += 1
                recovery = k
                segment = raw[onset : recovery + 1] - raw[onset]
                area = float(np.trapezoid(segment, dx=1.0 / fs))
                responses.append(
                    {
                        "onset": onset,
                        "peak": peak,
                        "recovery": recovery,
                        "amplitude": float(amplitude),
                        "duration": (recovery - onset) / fs,
                        "area": area,
                    }
                )
                i = recovery + 1
                continue
            i = peak + 1
            continue
        i += 1
    return responses


def sc_features(sc: ScSeries, config: ScrDetectorConfig = ScrDetectorConfig()) -> dict:
    """The 8 skin-conductance features over one window."""
    if sc.sample_rate < 2 * PHASIC_BAND[1]:
        raise ValueError(
            f"sample rate {sc.sample_rate} Hz too low; need at least "
            f"{2 * PHASIC_BAND[1]} Hz"
        )
    if sc.duration_seconds < 10.0:
        raise ValueError("SC window must span at least 10 s")
    phasic = phasic_component(sc, order=config.filter_order)
    second_diff = np.diff(sc.samples, n=2)
    responses = detect_scrs(sc, config)
    duration = sc.duration_seconds
    return {
        "sc_level": float(np.mean(sc.samples)),
        "sc_phasic_power": float(np.mean(phasic**2)),
        "sc_response_rate": len(responses) / duration,
        "sc_second_diff_power": float(np.mean(second_diff**2)) if second_diff.size else 0.0,
        "sc_response_count": float(len(responses)),
        "sc_magnitude_sum": float(sum(r["amplitude"] for r in responses)),
        "sc_duration_sum": float(sum(r["duration"] for r in responses)),
        "sc_area_sum": float(sum(r["area"] for r in responses)),
    }
