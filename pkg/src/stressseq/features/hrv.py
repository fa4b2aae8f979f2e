"""Heart-rate-variability features from RR-interval series.

Time-domain statistics operate directly on the interval list; frequency
features resample the tachogram onto a uniform grid and integrate a Welch
power spectral density over the standard VLF/LF/HF bands.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.signal import welch

RR_MIN_MS = 200.0
RR_MAX_MS = 3000.0

TIME_FEATURE_NAMES = [
    "mean_nni",
    "sdnn",
    "sdsd",
    "rmssd",
    "median_nni",
    "nni_50",
    "pnni_50",
    "nni_20",
    "pnni_20",
    "range_nni",
    "cvsd",
    "cvnni",
    "mean_hr",
    "max_hr",
    "min_hr",
    "std_hr",
]

FREQ_FEATURE_NAMES = [
    "total_power",
    "vlf",
    "lf",
    "hf",
    "lf_hf_ratio",
    "lfnu",
    "hfnu",
]


class InsufficientDataError(ValueError):
    """Raised when a series is too short for the requested features."""


@dataclass(frozen=True)
class RrSeries:
    """RR intervals in milliseconds, starting at ``t0`` seconds."""

    intervals: np.ndarray
    t0: int = 0
    dropped_implausible: int = 0

    def __post_init__(self):
        iv = np.asarray(self.intervals, dtype=np.float64)
        object.__setattr__(self, "intervals", iv)
        if iv.size and (np.any(iv <= 0) or not np.all(np.isfinite(iv))):
            raise ValueError("RR intervals must be positive and finite")

    @classmethod
    def from_raw(cls, intervals_ms, t0: int = 0) -> "RrSeries":
        """Apply the 200-3000 ms plausibility bound, counting dropped beats."""
        iv = np.asarray(intervals_ms, dtype=np.float64)
        keep = (iv >= RR_MIN_MS) & (iv <= RR_MAX_MS) & np.isfinite(iv)
        return cls(intervals=iv[keep], t0=t0, dropped_implausible=int(np.sum(~keep)))

    @property
    def beat_times(self) -> np.ndarray:
        """Cumulative beat times in seconds relative to t0."""
        return np.cumsum(self.intervals) / 1000.0

    @property
    def span_seconds(self) -> float:
        return float(self.beat_times[-1]) if self.intervals.size else 0.0


@dataclass(frozen=True)
class BandSpec:
    vlf: tuple = (0.003, 0.04)
    lf: tuple = (0.04, 0.15)
    hf: tuple = (0.15, 0.40)

    def __post_init__(self):
        bands = [self.vlf, self.lf, self.hf]
        for lo, hi in bands:
            if not lo < hi:
                raise ValueError("band edges must be increasing")
        for (_, a_hi), (b_lo, _) in zip(bands, bands[1:]):
            if b_lo < a_hi:
                raise ValueError("bands must not overlap")


def hrv_time_features(rr: RrSeries) -> dict:
    """The 16 time-domain features.

    Standard deviations are population statistics (ddof=0); nni_50/nni_20
    count absolute successive differences strictly greater than the
    threshold and pnni_* divide by the number of differences; heart-rate
    statistics act on per-beat instantaneous rates (60000 / interval).
    """
    iv = rr.intervals
    if iv.size < 2:
        raise InsufficientDataError("need at least 2 RR intervals")
    diff = np.diff(iv)
    abs_diff = np.abs(diff)
    hr = 60000.0 / iv
    nni_50 = int(np.sum(abs_diff > 50.0))
    nni_20 = int(np.sum(abs_diff > 20.0))
    mean_nni = float(np.mean(iv))
    sdnn = float(np.std(iv))
    rmssd = float(np.sqrt(np.mean(diff**2)))
    return {
        "mean_nni": mean_nni,
        "sdnn": sdnn,
        "sdsd": float(np.std(diff)),
        "rmssd": rmssd,
        "median_nni": float(np.median(iv)),
        "nni_50": float(nni_50),
        "pnni_50": nni_50 / diff.size,
        "nni_20": float(nni_20),
        "pnni_20": nni_20 / diff.size,
        "range_nni": float(np.max(iv) - np.min(iv)),
        "cvsd": rmssd / mean_nni,
        "cvnni": sdnn / mean_nni,
        "mean_hr": float(np.mean(hr)),
        "max_hr": float(np.max(hr)),
        "min_hr": float(np.min(hr)),
        "std_hr": float(np.std(hr)),
    }


def resample_tachogram(rr: RrSeries, fs: float = 4.0) -> np.ndarray:
    """Cubic interpolation of RR-vs-time onto a uniform ``fs`` grid, detrended."""
    times = rr.beat_times
    grid = np.arange(0.0, times[-1], 1.0 / fs)
    grid = grid[(grid >= times[0]) & (grid <= times[-1])]
    if grid.size < 4:
        raise InsufficientDataError("tachogram too short to resample")
    if rr.intervals.size >= 4:
        values = CubicSpline(times, rr.intervals)(grid)
    else:
        values = np.interp(grid, times, rr.intervals)
    return values - np.mean(values)


def band_power(freqs: np.ndarray, psd: np.ndarray, band) -> float:
    lo, hi = band
    mask = (freqs >= lo) & (freqs <= hi)
    if np.sum(mask) < 2:
        return 0.0
    return float(np.trapezoid(psd[mask], freqs[mask]))


def hrv_freq_features(
    rr: RrSeries,
    bands: BandSpec = BandSpec(),
    fs: float = 4.0,
    degenerate_floor: float = 1e-10,
) -> dict:
    """The 7 frequency-domain features from a Welch PSD of the tachogram.

    total_power integrates from the VLF floor to the HF ceiling; lfnu/hfnu
    are 100 * lf/(lf+hf) and 100 * hf/(lf+hf), reported as 0 with a
    ``degenerate`` flag when lf+hf vanishes.
    """
    if rr.intervals.size < 4:
        raise InsufficientDataError("need at least 4 RR intervals")
    if rr.span_seconds < 30.0:
        raise InsufficientDataError("need at least 30 s of RR data")
    signal = resample_tachogram(rr, fs=fs)
    nperseg = min(256, signal.size)
    freqs, psd = welch(
        signal, fs=fs, window="hann", nperseg=nperseg, noverlap=nperseg // 2
    )
    vlf = band_power(freqs, psd, bands.vlf)
    lf = band_power(freqs, psd, bands.lf)
    hf = band_power(freqs, psd, bands.hf)
    total = band_power(freqs, psd, (bands.vlf[0], bands.hf[1]))
    out = {
        "total_power": total,
        "vlf": vlf,
        "lf": lf,
        "hf": hf,
    }
    if lf + hf > degenerate_floor:
        out["lf_hf_ratio"] = lf / max(hf, degenerate_floor)
        out["lfnu"] = 100.0 * lf / (lf + hf)
        out["hfnu"] = 100.0 * hf / (lf + hf)
        out["degenerate"] = False
    else:
        out["lf_hf_ratio"] = 0.0
        out["lfnu"] = 0.0
        out["hfnu"] = 0.0
        out["degenerate"] = True
    return out
