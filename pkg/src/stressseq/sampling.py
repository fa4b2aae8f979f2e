"""Gaussian-mixture density over latent vectors and active unlabeled selection.

A mixture is fit with EM on the latent representations of labeled windows;
unlabeled windows whose latent negative log-likelihood under that mixture
falls at or below a threshold are selected for pretraining. Component count
is chosen from the elbow of the AIC/BIC curves.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cholesky, solve_triangular

from stressseq.core.rng import derived_rng

LOG_2PI = float(np.log(2.0 * np.pi))


class GmmFitError(RuntimeError):
    pass


@dataclass(frozen=True)
class GmmModel:
    weights: np.ndarray  # (K,) simplex
    means: np.ndarray  # (K, H)
    covariances: np.ndarray  # (K, H, H) symmetric positive-definite
    fit_log_likelihood: float
    ll_history: tuple = ()
    converged: bool = True

    @property
    def n_components(self) -> int:
        return self.weights.shape[0]

    @property
    def dim(self) -> int:
        return self.means.shape[1]

    def parameter_count(self) -> int:
        k, h = self.n_components, self.dim
        return (k - 1) + k * h + k * h * (h + 1) // 2


def _component_log_density(x: np.ndarray, mean: np.ndarray, cov: np.ndarray) -> np.ndarray:
    h = mean.shape[0]
    chol = cholesky(cov, lower=True)
    solved = solve_triangular(chol, (x - mean).T, lower=True)
    maha = np.sum(solved**2, axis=0)
    log_det = 2.0 * np.sum(np.log(np.diag(chol)))
    return -0.5 * (h * LOG_2PI + log_det + maha)


def log_density(model: GmmModel, latents: np.ndarray) -> np.ndarray:
    """Per-sample log mixture density via log-sum-exp over components."""
    latents = np.atleast_2d(np.asarray(latents, dtype=np.float64))
    parts = np.stack(
        [
            np.log(model.weights[k]) + _component_log_density(latents, model.means[k], model.covariances[k])
            for k in range(model.n_components)
        ],
        axis=1,
    )
    top = parts.max(axis=1, keepdims=True)
    return (top + np.log(np.sum(np.exp(parts - top), axis=1, keepdims=True)))[:, 0]


def nll(model: GmmModel, latent: np.ndarray):
    """Negative log-likelihood of one latent vector (or a batch of them)."""
    latent = np.asarray(latent, dtype=np.float64)
    values = -log_density(model, latent)
    return float(values[0]) if latent.ndim == 1 else values


def _em_once(latents, k, rng, max_iter, tol, reg):
    n, h = latents.shape
    idx = rng.choice(n, size=k, replace=False)
    means = latents[idx].copy()
    base_cov = np.cov(latents.T, bias=True).reshape(h, h) + reg * np.eye(h)
    covs = np.stack([base_cov.copy() for _ in range(k)])
    weights = np.full(k, 1.0 / k)

    history = []
    converged = False
    resp = None
    for _ in range(max_iter):
        # E step
        parts = np.stack(
            [
                np.log(weights[m]) + _component_log_density(latents, means[m], covs[m])
                for m in range(k)
            ],
            axis=1,
        )
        top = parts.max(axis=1, keepdims=True)
        log_norm = top + np.log(np.sum(np.exp(parts - top), axis=1, keepdims=True))
        ll = float(np.sum(log_norm))
        if history:
            slack = 1e-10 * max(1.0, abs(history[-1]))
            if ll < history[-1] - slack:
                raise GmmFitError(
                    f"EM log-likelihood decreased: {history[-1]} -> {ll}"
                )
        if history and abs(ll - history[-1]) < tol * max(1.0, abs(history[-1])):
            history.append(ll)
            converged = True
            break
        history.append(ll)
        resp = np.exp(parts - log_norm)

        # M step
        counts = resp.sum(axis=0) + 10 * np.finfo(np.float64).eps
        weights = counts / counts.sum()
        means = (resp.T @ latents) / counts[:, None]
        for m in range(k):
            diff = latents - means[m]
            covs[m] = (resp[:, m : m + 1] * diff).T @ diff / counts[m]
            covs[m] += reg * np.eye(h)

    return GmmModel(
        weights=weights,
        means=means,
        covariances=covs,
        fit_log_likelihood=history[-1],
        ll_history=tuple(history),
        converged=converged,
    )


def fit_gmm(
    latents: np.ndarray,
    k: int,
    seed: int,
    restarts: int = 5,
    max_iter: int = 200,
    tol: float = 1e-6,
    reg: float = 1e-6,
) -> GmmModel:
    """Full-covariance GMM by EM; best of ``restarts`` seeded runs.

    Covariances are regularized by reg * I each M step; a singular fit is
    retried once with a 100x larger regularizer before failing.
    """
    latents = np.asarray(latents, dtype=np.float64)
    if latents.ndim != 2:
        raise ValueError("latents must be (N, H)")
    n, h = latents.shape
    if n <= k * h:
        raise ValueError(f"need more than K*H = {k * h} samples to fit K={k}, got {n}")
    if not np.all(np.isfinite(latents)):
        raise ValueError("latents must be finite")

    best = None
    for r in range(restarts):
        rng = derived_rng(seed, "gmm", k, r)
        try:
            model = _em_once(latents, k, rng, max_iter, tol, reg)
        except np.linalg.LinAlgError:
            model = None
        if model is None:
            try:
                rng = derived_rng(seed, "gmm-retry", k, r)
                model = _em_once(latents, k, rng, max_iter, tol, reg * 100)
            except np.linalg.LinAlgError:
                continue
        if best is None or model.fit_log_likelihood > best.fit_log_likelihood:
            best = model
    if best is None:
        raise GmmFitError("all EM restarts hit singular covariances")
    return best


def information_criteria(model: GmmModel, n_samples: int) -> tuple:
    """(AIC, BIC) = (2p - 2LL, p ln N - 2LL)."""
    p = model.parameter_count()
    ll = model.fit_log_likelihood
    return 2.0 * p - 2.0 * ll, p * float(np.log(n_samples)) - 2.0 * ll


def select_k(latents: np.ndarray, k_range, seed: int, elbow_fraction: float = 0.02):
    """Component count at the BIC elbow, plus the per-k audit table.

    The elbow is the last k before BIC improvement over the previous k drops
    below ``elbow_fraction`` of the full BIC range; if improvements never
    flatten, the largest candidate wins. Candidates that violate the sample
    precondition are skipped.
    """
    latents = np.asarray(latents, dtype=np.float64)
    n = latents.shape[0]
    table = []
    for k in k_range:
        if n <= k * latents.shape[1]:
            break
        model = fit_gmm(latents, k, seed)
        aic, bic = information_criteria(model, n)
        table.append(
            {
                "k": k,
                "aic": aic,
                "bic": bic,
                "log_likelihood": model.fit_log_likelihood,
                "parameters": model.parameter_count(),
            }
        )
    if not table:
        raise ValueError("no feasible component count in k_range")
    if len(table) == 1:
        return table[0]["k"], table
    bics = np.array([row["bic"] for row in table])
    spread = float(bics.max() - bics.min())
    chosen = table[-1]["k"]
    for i in range(1, len(table)):
        improvement = bics[i - 1] - bics[i]
        if improvement <= elbow_fraction * spread:
            chosen = table[i - 1]["k"]
            break
    return chosen, table


@dataclass(frozen=True)
class SelectionReport:
    threshold: float
    selected_unlabeled_ids: tuple
    fraction_unlabeled_selected: float
    fraction_labeled_below_threshold: float
    unlabeled_nll: tuple = field(repr=False, default=())


def select_unlabeled(
    model: GmmModel,
    unlabeled_latents: np.ndarray,
    threshold: float,
    labeled_latents: np.ndarray | None = None,
    unlabeled_ids=None,
) -> SelectionReport:
    """Unlabeled samples whose latent NLL is at or below ``threshold``.

    The report also carries the fraction of labeled samples below the same
    threshold, for selected-volume comparisons.
    """
    unlabeled_latents = np.asarray(unlabeled_latents, dtype=np.float64)
    n = unlabeled_latents.shape[0]
    if unlabeled_ids is None:
        unlabeled_ids = list(range(n))
    scores = nll(model, unlabeled_latents) if n else np.zeros(0)
    selected = [unlabeled_ids[i] for i in range(n) if scores[i] <= threshold]
    labeled_fraction = float("nan")
    if labeled_latents is not None and len(labeled_latents):
        labeled_scores = nll(model, np.asarray(labeled_latents, dtype=np.float64))
        labeled_fraction = float(np.mean(labeled_scores <= threshold))
    return SelectionReport(
        threshold=float(threshold),
        selected_unlabeled_ids=tuple(selected),
        fraction_unlabeled_selected=(len(selected) / n) if n else 0.0,
        fraction_labeled_below_threshold=labeled_fraction,
        unlabeled_nll=tuple(float(s) for s in scores),
    )


@dataclass(frozen=True)
class PcaResult:
    projected: np.ndarray  # (N, dims)
    eigenvalues: np.ndarray  # all H eigenvalues, descending
    components: np.ndarray  # (dims, H)
    mean: np.ndarray
    explained_ratio: np.ndarray  # (dims,)


def pca_project(latents: np.ndarray, dims: int = 2) -> PcaResult:
    """Mean-centered projection onto the top principal components.

    Visualization only; density estimation runs in the full latent space.
    """
    x = np.asarray(latents, dtype=np.float64)
    n, h = x.shape
    if n < dims:
        raise ValueError("need at least as many samples as output dims")
    mean = x.mean(axis=0)
    centered = x - mean
    cov = centered.T @ centered / n
    eigvals, eigvecs = np.linalg.eigh(cov)
    order = np.argsort(eigvals)[::-1]
    eigvals = eigvals[order]
    eigvecs = eigvecs[:, order]
    components = eigvecs[:, :dims].T
    total = float(eigvals.sum())
    ratio = eigvals[:dims] / total if total > 0 else np.zeros(dims)
    return PcaResult(
        projected=centered @ components.T,
        eigenvalues=eigvals,
        components=components,
        mean=mean,
        explained_ratio=ratio,
    )
