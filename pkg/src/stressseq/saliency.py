"""Gradient-based input attribution.

Per-window saliency is the absolute gradient of the pre-sigmoid logit with
respect to each input cell (eval-mode pass, so the map is deterministic).
Window maps are averaged and max-normalized to [0, 1]; the effective horizon
is the trailing span whose every timestep still has at least one feature
above threshold.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from stressseq.nn.checkpoint import Checkpoint
from stressseq.training import Scaler


@dataclass(frozen=True)
class SaliencyMap:
    values: np.ndarray  # (T, F) in [0, 1] after normalization
    feature_names: tuple
    resolution_minutes: float
    sample_count: int
    degenerate: bool = False  # all-zero map; normalization skipped


def sample_saliency(model, window: np.ndarray) -> np.ndarray:
    """|d logit / d input| for one (T, F) window already standardized."""
    x = np.asarray(window, dtype=np.float64)[None, :, :]
    logits, cache = model.forward(x, mode="eval")
    _, d_input = model.backward(cache, np.ones_like(logits))
    return np.abs(d_input[0])


def batch_saliency(model, windows: np.ndarray) -> np.ndarray:
    """Per-sample absolute gradients for an (N, T, F) batch, one backward
    pass per window so gradients never mix across samples."""
    windows = np.asarray(windows, dtype=np.float64)
    return np.stack([sample_saliency(model, w) for w in windows])


def average_saliency(
    checkpoint: Checkpoint,
    windows: np.ndarray,
    feature_names=None,
    resolution_minutes: float = float("nan"),
) -> SaliencyMap:
    """Mean of per-window absolute saliency maps, max-normalized.

    ``windows`` are raw feature windows; the checkpoint's scaler is applied
    before the forward pass, matching how the model consumes data.
    """
    windows = np.asarray(windows, dtype=np.float64)
    if windows.ndim != 3 or windows.shape[0] < 1:
        raise ValueError("need at least one (T, F) window")
    model = checkpoint.to_classifier()
    scaler = Scaler.from_dict(checkpoint.meta["scaler"])
    maps = batch_saliency(model, scaler.transform(windows))
    mean_map = maps.mean(axis=0)
    peak = float(mean_map.max())
    degenerate = peak <= 0.0
    values = mean_map if degenerate else mean_map / peak
    if feature_names is None:
        feature_names = checkpoint.meta.get(
            "feature_names", [f"f{i}" for i in range(windows.shape[2])]
        )
    if np.isnan(resolution_minutes):
        resolution_minutes = float(checkpoint.meta.get("step_resolution_minutes", float("nan")))
    return SaliencyMap(
        values=values,
        feature_names=tuple(feature_names),
        resolution_minutes=resolution_minutes,
        sample_count=windows.shape[0],
        degenerate=degenerate,
    )


def effective_horizon(saliency: SaliencyMap, threshold: float = 0.5) -> float:
    """Minutes covered by the maximal trailing run of timesteps that each
    contain at least one feature above ``threshold``."""
    hot = np.any(saliency.values > threshold, axis=1)
    run = 0
    for flag in hot[::-1]:
        if not flag:
            break
        run += 1
    return run * saliency.resolution_minutes
