"""Loss heads: binary cross-entropy and Bernoulli KL consistency loss."""
from __future__ import annotations

import numpy as np

from stressseq.nn.layers import sigmoid

PROB_CLAMP = 1e-7


def softplus(x: np.ndarray) -> np.ndarray:
    return np.maximum(x, 0.0) + np.log1p(np.exp(-np.abs(x)))


def bce_with_logits(logits: np.ndarray, labels: np.ndarray):
    """Mean binary cross-entropy from logits, with exact gradient.

    Uses the log-sum-exp form max(z,0) - z*y + log(1+exp(-|z|)), stable for
    saturated logits. Returns (loss, dloss/dlogits).
    """
    logits = np.asarray(logits, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.float64)
    if logits.shape != labels.shape:
        raise ValueError("logits and labels must share shape")
    per_sample = np.maximum(logits, 0.0) - logits * labels + np.log1p(np.exp(-np.abs(logits)))
    loss = float(np.mean(per_sample))
    grad = (sigmoid(logits) - labels) / logits.size
    return loss, grad


def kl_bernoulli_from_logits(p_target: np.ndarray, logits: np.ndarray):
    """Mean KL(p || q) with q = sigmoid(logits) and p a constant target.

    Gradient flows only into the logits: d/dz of the q-side terms is
    (q - p) / B. The loss value is computed with softplus on the q side
    (no clamping needed) and a clamp on p only for its entropy terms.
    Returns (loss, dloss/dlogits).
    """
    p = np.clip(np.asarray(p_target, dtype=np.float64), PROB_CLAMP, 1.0 - PROB_CLAMP)
    logits = np.asarray(logits, dtype=np.float64)
    if p.shape != logits.shape:
        raise ValueError("targets and logits must share shape")
    entropy = p * np.log(p) + (1.0 - p) * np.log(1.0 - p)
    cross = p * softplus(-logits) + (1.0 - p) * softplus(logits)
    loss = float(np.mean(entropy + cross))
    grad = (sigmoid(logits) - p) / logits.size
    return loss, grad


def kl_bernoulli(p: np.ndarray, q: np.ndarray) -> float:
    """KL between Bernoulli probability vectors (mean over the batch)."""
    p = np.clip(np.asarray(p, dtype=np.float64), PROB_CLAMP, 1.0 - PROB_CLAMP)
    q = np.clip(np.asarray(q, dtype=np.float64), PROB_CLAMP, 1.0 - PROB_CLAMP)
    return float(np.mean(p * np.log(p / q) + (1.0 - p) * np.log((1.0 - p) / (1.0 - q))))


def mse(x: np.ndarray, x_hat: np.ndarray):
    """Mean squared error over all elements, with gradient w.r.t. x_hat."""
    x = np.asarray(x, dtype=np.float64)
    x_hat = np.asarray(x_hat, dtype=np.float64)
    if x.shape != x_hat.shape:
        raise ValueError("shapes must match")
    diff = x_hat - x
    loss = float(np.mean(diff**2))
    grad = 2.0 * diff / diff.size
    return loss, grad
