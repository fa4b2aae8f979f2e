"""Stochastic time-series augmentation: jitter, scale, time warp, magnitude warp.

All operators preserve shape and labels and degenerate to the identity when
their noise parameter is zero. Parameters assume standardized inputs, so the
defaults are scale-free.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.interpolate import CubicSpline

from stressseq.core.rng import derived_rng
from stressseq.core.types import SequenceWindow

OPERATORS = ("jitter", "scale", "time_warp", "magnitude_warp")
DEFAULT_OPS = ("jitter", "scale", "time_warp", "magnitude_warp")

_RATE_FLOOR = 1e-6


@dataclass(frozen=True)
class AugmentationSpec:
    ops: tuple = DEFAULT_OPS
    jitter_sigma: float = 0.03
    scale_sigma: float = 0.05
    scale_per: str = "feature"  # or "window"
    mw_sigma: float = 0.05
    mw_knots: int = 4
    tw_sigma: float = 0.2
    tw_knots: int = 4
    count: int = 10  # augmented copies per window (M)

    def __post_init__(self):
        object.__setattr__(self, "ops", tuple(self.ops))
        for op in self.ops:
            if op not in OPERATORS:
                raise ValueError(f"unknown augmentation op {op!r}")
        if self.count < 1:
            raise ValueError("count must be >= 1")
        if min(self.jitter_sigma, self.scale_sigma, self.mw_sigma, self.tw_sigma) < 0:
            raise ValueError("sigmas must be >= 0")
        if min(self.mw_knots, self.tw_knots) < 2:
            raise ValueError("knot counts must be >= 2")
        if self.scale_per not in ("feature", "window"):
            raise ValueError("scale_per must be 'feature' or 'window'")

    def to_dict(self) -> dict:
        return {
            "ops": list(self.ops),
            "jitter_sigma": self.jitter_sigma,
            "scale_sigma": self.scale_sigma,
            "scale_per": self.scale_per,
            "mw_sigma": self.mw_sigma,
            "mw_knots": self.mw_knots,
            "tw_sigma": self.tw_sigma,
            "tw_knots": self.tw_knots,
            "count": self.count,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "AugmentationSpec":
        known = {f.name for f in cls.__dataclass_fields__.values()}  # type: ignore[attr-defined]
        return cls(**{k: v for k, v in d.items() if k in known})


def jitter(window: np.ndarray, sigma: float, rng: np.random.Generator) -> np.ndarray:
    """Add Gaussian noise with std sigma * (per-column std of the window)."""
    window = np.asarray(window, dtype=np.float64)
    if sigma < 0:
        raise ValueError("sigma must be >= 0")
    if sigma == 0:
        return window.copy()
    col_std = np.std(window, axis=0)
    noise = rng.standard_normal(window.shape) * (sigma * col_std)
    return window + noise


def scale(
    window: np.ndarray,
    sigma: float = 0.05,
    rng: np.random.Generator | None = None,
    per: str = "feature",
) -> np.ndarray:
    """Multiply each column (or the whole window) by a factor ~ Normal(1, sigma)."""
    window = np.asarray(window, dtype=np.float64)
    if sigma == 0:
        return window.copy()
    if per == "feature":
        factors = rng.normal(1.0, sigma, size=window.shape[1])
    else:
        factors = np.full(window.shape[1], rng.normal(1.0, sigma))
    return window * factors


def _knot_curve(length: int, knots: int, sigma: float, rng, positive: bool) -> np.ndarray:
    positions = np.linspace(0.0, length - 1.0, knots)
    values = rng.normal(1.0, sigma, size=knots)
    if positive:
        for _ in range(100):
            bad = values <= 0
            if not bad.any():
                break
            values[bad] = rng.normal(1.0, sigma, size=int(bad.sum()))
    return CubicSpline(positions, values, bc_type="natural")(np.arange(length))


def magnitude_warp(
    window: np.ndarray, sigma: float = 0.05, knots: int = 4, rng=None
) -> np.ndarray:
    """Multiply each column by a smooth random curve varying around one."""
    window = np.asarray(window, dtype=np.float64)
    steps = window.shape[0]
    if steps < 2 or knots < 2:
        raise ValueError("need T >= 2 and knots >= 2")
    if sigma == 0:
        return window.copy()
    curves = np.stack(
        [_knot_curve(steps, knots, sigma, rng, positive=False) for _ in range(window.shape[1])],
        axis=1,
    )
    return window * curves


def time_warp(
    window: np.ndarray, sigma: float = 0.2, knots: int = 4, rng=None
) -> np.ndarray:
    """Distort the time axis with one smooth strictly increasing warp.

    The warp is the renormalized cumulative sum of a positive smoothed rate
    curve (knot multipliers ~ Normal(1, sigma), resampled when nonpositive,
    floored away from zero), so endpoints are fixed exactly and the warp is
    strictly increasing. All columns share the warp.
    """
    window = np.asarray(window, dtype=np.float64)
    steps = window.shape[0]
    if steps < 2 or knots < 2:
        raise ValueError("need T >= 2 and knots >= 2")
    if sigma == 0:
        return window.copy()
    rate = _knot_curve(steps, knots, sigma, rng, positive=True)
    rate = np.maximum(rate, _RATE_FLOOR)
    tau = np.cumsum(rate)
    tau -= tau[0]
    tau *= (steps - 1) / tau[-1]
    base = np.arange(steps)
    out = np.empty_like(window)
    for f in range(window.shape[1]):
        out[:, f] = np.interp(tau, base, window[:, f])
    out[0] = window[0]
    out[-1] = window[-1]
    return out


def apply_ops(
    window: np.ndarray, spec: AugmentationSpec, rng: np.random.Generator
) -> np.ndarray:
    """Apply spec.ops in listed order with fresh randomness from ``rng``."""
    out = np.asarray(window, dtype=np.float64).copy()
    for op in spec.ops:
        if op == "jitter":
            out = jitter(out, spec.jitter_sigma, rng)
        elif op == "scale":
            out = scale(out, spec.scale_sigma, rng, per=spec.scale_per)
        elif op == "time_warp":
            out = time_warp(out, spec.tw_sigma, spec.tw_knots, rng)
        elif op == "magnitude_warp":
            out = magnitude_warp(out, spec.mw_sigma, spec.mw_knots, rng)
    return out


def augment_batch(windows, spec: AugmentationSpec, seed: int) -> list:
    """M augmented copies per window, labels carried through unchanged.

    Per-copy generators derive from (seed, window position, copy index), so
    results are independent of scheduling and iteration order.
    """
    out = []
    for w_idx, window in enumerate(windows):
        copies = []
        for m in range(spec.count):
            rng = derived_rng(seed, "augment", w_idx, m)
            feats = apply_ops(window.features, spec, rng)
            copies.append(
                SequenceWindow(
                    participant_id=window.participant_id,
                    t_end=window.t_end,
                    features=feats,
                    label=window.label,
                    raw_level=window.raw_level,
                )
            )
        out.append(copies)
    return out
