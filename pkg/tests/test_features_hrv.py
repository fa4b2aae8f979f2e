"""HRV features against hand computations and a brute-force DFT oracle."""
import numpy as np
import pytest

from stressseq.features.hrv import (
    BandSpec,
    InsufficientDataError,
    RrSeries,
    hrv_freq_features,
    hrv_time_features,
    resample_tachogram,
)


def hand_time_features(intervals):
    """Independent recomputation of every time-domain formula, written out
    longhand (population standard deviations)."""
    iv = [float(v) for v in intervals]
    n = len(iv)
    diffs = [b - a for a, b in zip(iv, iv[1:])]
    mean = sum(iv) / n
    sdnn = (sum((v - mean) ** 2 for v in iv) / n) ** 0.5
    mean_diff = sum(diffs) / len(diffs)
    sdsd = (sum((d - mean_diff) ** 2 for d in diffs) / len(diffs)) ** 0.5
    rmssd = (sum(d * d for d in diffs) / len(diffs)) ** 0.5
    nni_50 = sum(1 for d in diffs if abs(d) > 50.0)
    nni_20 = sum(1 for d in diffs if abs(d) > 20.0)
    hr = [60000.0 / v for v in iv]
    hr_mean = sum(hr) / n
    return {
        "mean_nni": mean,
        "sdnn": sdnn,
        "sdsd": sdsd,
        "rmssd": rmssd,
        "median_nni": float(np.median(iv)),
        "nni_50": float(nni_50),
        "pnni_50": nni_50 / len(diffs),
        "nni_20": float(nni_20),
        "pnni_20": nni_20 / len(diffs),
        "range_nni": max(iv) - min(iv),
        "cvsd": rmssd / mean,
        "cvnni": sdnn / mean,
        "mean_hr": hr_mean,
        "max_hr": max(hr),
        "min_hr": min(hr),
        "std_hr": (sum((v - hr_mean) ** 2 for v in hr) / n) ** 0.5,
    }


CRAFTED_SERIES = [
    [800.0, 800.0, 800.0],
    [800.0, 860.0, 800.0],
    [1000.0, 1020.0],
    [700.0, 755.0, 721.0, 690.0, 840.0],
    [920.0, 880.0, 940.0, 900.0, 860.0, 1010.0, 770.0],
]


class TestTimeDomain:
    def test_constant_series(self):
        out = hrv_time_features(RrSeries([800.0, 800.0, 800.0]))
        assert out["mean_nni"] == 800.0
        assert out["sdnn"] == 0.0
        assert out["rmssd"] == 0.0
        assert out["mean_hr"] == 75.0
        assert out["nni_50"] == 0.0

    def test_single_bump_series(self):
        out = hrv_time_features(RrSeries([800.0, 860.0, 800.0]))
        assert out["nni_50"] == 2.0
        assert out["pnni_50"] == 1.0
        assert out["rmssd"] == 60.0
        assert out["range_nni"] == 60.0

    def test_threshold_is_strict(self):
        out = hrv_time_features(RrSeries([1000.0, 1020.0]))
        assert out["nni_20"] == 0.0
        assert out["pnni_20"] == 0.0

    @pytest.mark.parametrize("intervals", CRAFTED_SERIES)
    def test_exact_match_with_hand_formulas(self, intervals):
        out = hrv_time_features(RrSeries(intervals))
        expected = hand_time_features(intervals)
        assert set(out) == set(expected)
        for name, value in expected.items():
            np.testing.assert_allclose(out[name], value, rtol=0, atol=1e-12)

    def test_count_proportion_identity(self):
        rng = np.random.default_rng(0)
        for _ in range(50):
            n = int(rng.integers(2, 40))
            iv = rng.uniform(600, 1200, size=n)
            out = hrv_time_features(RrSeries(iv))
            assert out["pnni_50"] * (n - 1) == out["nni_50"]
            assert out["pnni_20"] * (n - 1) == out["nni_20"]
            assert out["cvsd"] == out["rmssd"] / out["mean_nni"]
            assert out["cvnni"] == out["sdnn"] / out["mean_nni"]

    def test_interval_scaling_property(self):
        rng = np.random.default_rng(1)
        iv = rng.uniform(700, 1100, size=20)
        c = 1.37
        base = hrv_time_features(RrSeries(iv))
        scaled = hrv_time_features(RrSeries(iv * c))
        for name in ("mean_nni", "sdnn", "sdsd", "rmssd", "median_nni", "range_nni"):
            np.testing.assert_allclose(scaled[name], base[name] * c, rtol=1e-12)

    def test_too_few_intervals_raises(self):
        with pytest.raises(InsufficientDataError):
            hrv_time_features(RrSeries([800.0]))

    def test_plausibility_bound_drops_and_counts(self):
        series = RrSeries.from_raw([100.0, 800.0, 820.0, 4000.0])
        assert series.intervals.tolist() == [800.0, 820.0]
        assert series.dropped_implausible == 2


def sinusoid_rr(freq_hz, amplitude=100.0, baseline=1000.0, beats=300):
    """RR series whose tachogram oscillates at freq_hz."""
    intervals = []
    t = 0.0
    for _ in range(beats):
        iv = baseline + amplitude * np.sin(2 * np.pi * freq_hz * t)
        intervals.append(iv)
        t += iv / 1000.0
    return RrSeries(intervals)


def dft_band_powers(signal, fs, bands):
    """Brute-force O(N^2) DFT periodogram, integrated per band."""
    n = signal.size
    powers = {}
    freq_res = fs / n
    spectrum = np.zeros(n // 2 + 1)
    for k in range(n // 2 + 1):
        acc = 0.0 + 0.0j
        for m in range(n):
            acc += signal[m] * np.exp(-2j * np.pi * k * m / n)
        density = (abs(acc) ** 2) / (fs * n)
        if 0 < k < n / 2:
            density *= 2.0  # one-sided
        spectrum[k] = density
    for name, (lo, hi) in bands.items():
        total = 0.0
        for k in range(n // 2 + 1):
            if lo <= k * freq_res <= hi:
                total += spectrum[k] * freq_res
        powers[name] = total
    return powers


class TestFrequencyDomain:
    def test_lf_sinusoid_dominates_lf_band(self):
        rr = sinusoid_rr(0.1)
        out = hrv_freq_features(rr)
        in_band = out["vlf"] + out["lf"] + out["hf"]
        assert out["lf"] >= 0.95 * in_band
        assert out["lf_hf_ratio"] >= 19.0

        # Independent brute-force DFT oracle agrees on the band placement.
        signal = resample_tachogram(rr, fs=4.0)
        oracle = dft_band_powers(
            signal[:512], 4.0, {"vlf": (0.003, 0.04), "lf": (0.04, 0.15), "hf": (0.15, 0.40)}
        )
        oracle_total = oracle["vlf"] + oracle["lf"] + oracle["hf"]
        assert oracle["lf"] >= 0.95 * oracle_total

    def test_hf_sinusoid_dominates_hf_band(self):
        rr = sinusoid_rr(0.3)
        out = hrv_freq_features(rr)
        in_band = out["vlf"] + out["lf"] + out["hf"]
        assert out["hf"] >= 0.95 * in_band
        signal = resample_tachogram(rr, fs=4.0)
        oracle = dft_band_powers(
            signal[:512], 4.0, {"vlf": (0.003, 0.04), "lf": (0.04, 0.15), "hf": (0.15, 0.40)}
        )
        oracle_total = oracle["vlf"] + oracle["lf"] + oracle["hf"]
        assert oracle["hf"] >= 0.95 * oracle_total

    def test_constant_tachogram_is_degenerate(self):
        out = hrv_freq_features(RrSeries([1000.0] * 60))
        assert out["vlf"] < 1e-10 and out["lf"] < 1e-10 and out["hf"] < 1e-10
        assert out["degenerate"] is True
        assert out["lfnu"] == 0.0 and out["hfnu"] == 0.0

    def test_normalized_powers_sum_to_hundred(self):
        rng = np.random.default_rng(2)
        for seed in range(5):
            iv = 1000.0 + 80.0 * rng.standard_normal(200)
            iv = np.clip(iv, 600, 1500)
            out = hrv_freq_features(RrSeries(iv))
            if not out["degenerate"]:
                np.testing.assert_allclose(out["lfnu"] + out["hfnu"], 100.0, atol=1e-9)

    def test_band_powers_non_negative_and_bounded_by_total(self):
        rng = np.random.default_rng(3)
        iv = 1000.0 + 60.0 * rng.standard_normal(150)
        out = hrv_freq_features(RrSeries(iv))
        for band in ("vlf", "lf", "hf"):
            assert out[band] >= 0.0
            assert out[band] <= out["total_power"] + 1e-9

    def test_insufficient_span_raises(self):
        with pytest.raises(InsufficientDataError):
            hrv_freq_features(RrSeries([800.0, 810.0, 790.0, 805.0]))

    def test_t0_is_irrelevant(self):
        iv = sinusoid_rr(0.1).intervals
        a = hrv_freq_features(RrSeries(iv, t0=0))
        b = hrv_freq_features(RrSeries(iv, t0=99999))
        assert a == b
