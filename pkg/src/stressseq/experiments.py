"""Experiment orchestration: fold-aware pretraining, active-sampling sweep,
checkpoint evaluation, and the method-ablation benchmark."""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from stressseq.autoencoder import AePretrainSpec, SequenceAutoencoder, pretrain
from stressseq.core.rng import derived_rng
from stressseq.core.types import Dataset, Split
from stressseq.core.ops import make_splits
from stressseq.evaluation import EvalReport, evaluate_predictions, random_baseline
from stressseq.nn.checkpoint import Checkpoint
from stressseq.nn.model import NetworkSpec
from stressseq.sampling import SelectionReport, fit_gmm, select_k, select_unlabeled
from stressseq.synth import SynthSpec, generate
from stressseq.training import Scaler, TrainResult, TrainSpec, predict, train


def fold_scaler(dataset: Dataset, split: Split, fold: int) -> Scaler:
    train_idx, _ = split.train_val_indices(dataset, fold)
    return Scaler.fit(np.stack([dataset.windows[i].features for i in train_idx]))


def _training_pool(dataset: Dataset, split: Split, fold: int, labeled: bool):
    train_idx, _ = split.train_val_indices(dataset, fold)
    return [
        i for i in train_idx if dataset.windows[i].is_labeled == labeled
    ]


@dataclass
class PretrainOutcome:
    checkpoint: Checkpoint
    autoencoder: SequenceAutoencoder
    curve: list
    selection: SelectionReport | None = None
    k_table: list = field(default_factory=list)
    chosen_k: int = 0


def pretrain_for_fold(
    dataset: Dataset,
    split: Split,
    fold: int,
    network: NetworkSpec,
    ae_spec: AePretrainSpec,
    seed: int,
    pool_indices=None,
    scaler: Scaler | None = None,
) -> PretrainOutcome:
    """Autoencoder pretraining restricted to training-fold windows.

    By default the pool is every unlabeled training-fold window; an explicit
    ``pool_indices`` (dataset window indices) narrows it, e.g. to an actively
    selected subset.
    """
    if scaler is None:
        scaler = fold_scaler(dataset, split, fold)
    if pool_indices is None:
        pool_indices = _training_pool(dataset, split, fold, labeled=False)
    pool_indices = sorted(pool_indices)
    if not pool_indices:
        raise ValueError("pretraining pool is empty")
    windows = scaler.transform(
        np.stack([dataset.windows[i].features for i in pool_indices])
    )
    network = network.with_input_dim(dataset.n_features)
    ae, curve = pretrain(windows, ae_spec, network, seed)
    participants = sorted({dataset.windows[i].participant_id for i in pool_indices})
    checkpoint = ae.to_checkpoint(
        meta={
            "seed": seed,
            "fold": fold,
            "fold_count": split.fold_count,
            "source_participants": participants,
            "source_window_count": len(pool_indices),
            "scaler": scaler.to_dict(),
        }
    )
    return PretrainOutcome(checkpoint=checkpoint, autoencoder=ae, curve=curve)


def active_selection_for_fold(
    dataset: Dataset,
    split: Split,
    fold: int,
    network: NetworkSpec,
    ae_spec: AePretrainSpec,
    threshold: float,
    seed: int,
    k_range=range(1, 11),
    scaler: Scaler | None = None,
):
    """Latent-density selection of unlabeled training-fold windows.

    A first autoencoder is trained on labeled training-fold windows only;
    a GMM over their latents (component count from the AIC/BIC elbow)
    scores every unlabeled training-fold window, and those at or below the
    NLL threshold are selected.

    Returns (selection_report, selected dataset indices, chosen_k, k_table).
    """
    if scaler is None:
        scaler = fold_scaler(dataset, split, fold)
    labeled_idx = _training_pool(dataset, split, fold, labeled=True)
    unlabeled_idx = _training_pool(dataset, split, fold, labeled=False)
    if not labeled_idx:
        raise ValueError("no labeled training-fold windows to model")
    labeled_outcome = pretrain_for_fold(
        dataset, split, fold, network, ae_spec, seed,
        pool_indices=labeled_idx, scaler=scaler,
    )
    ae = labeled_outcome.autoencoder
    latents_labeled = ae.encode(
        scaler.transform(np.stack([dataset.windows[i].features for i in labeled_idx]))
    )
    latents_unlabeled = ae.encode(
        scaler.transform(np.stack([dataset.windows[i].features for i in unlabeled_idx]))
    ) if unlabeled_idx else np.zeros((0, ae.latent_dim))

    chosen_k, k_table = select_k(latents_labeled, k_range, seed)
    model = fit_gmm(latents_labeled, chosen_k, seed)
    report = select_unlabeled(
        model,
        latents_unlabeled,
        threshold,
        labeled_latents=latents_labeled,
        unlabeled_ids=unlabeled_idx,
    )
    return report, sorted(report.selected_unlabeled_ids), chosen_k, k_table


def train_method(
    dataset: Dataset,
    split: Split,
    fold: int,
    spec: TrainSpec,
    ae_spec: AePretrainSpec,
    seed: int,
    active_threshold: float | None = None,
    active_k_range=range(1, 11),
) -> TrainResult:
    """Train one method on one fold, running any required pretraining on
    training-fold data (actively selected when the pretrain spec asks)."""
    pretrained = None
    if spec.uses_pretraining:
        scaler = fold_scaler(dataset, split, fold)
        pool = None
        if ae_spec.unlabeled_source == "active_selected":
            if active_threshold is None:
                raise ValueError("active_selected pretraining needs a threshold")
            _, pool, _, _ = active_selection_for_fold(
                dataset, split, fold, spec.network, ae_spec, active_threshold,
                seed, k_range=active_k_range, scaler=scaler,
            )
            if not pool:
                pool = None  # fall back to the full unlabeled pool
        outcome = pretrain_for_fold(
            dataset, split, fold, spec.network, ae_spec, seed,
            pool_indices=pool, scaler=scaler,
        )
        pretrained = outcome.checkpoint
    return train(dataset, split, fold, spec, pretrained=pretrained, seed=seed)


def evaluate_checkpoint(
    checkpoint: Checkpoint, dataset: Dataset, split: Split, fold: int
) -> EvalReport:
    """Score a trained checkpoint on the labeled validation windows of a fold."""
    _, val_idx = split.train_val_indices(dataset, fold)
    val_windows = [dataset.windows[i] for i in val_idx if dataset.windows[i].is_labeled]
    if not val_windows:
        raise ValueError(f"fold {fold} has no labeled validation windows")
    x = np.stack([w.features for w in val_windows])
    labels = [w.label for w in val_windows]
    raw_levels = [w.raw_level for w in val_windows]
    probs = predict(checkpoint, x)
    return evaluate_predictions(
        probs,
        labels,
        raw_levels=raw_levels,
        fold=fold,
        seed=int(checkpoint.meta.get("seed", -1)),
    )


@dataclass
class SweepPoint:
    threshold: float
    arm: str  # "active" or "random"
    seed: int
    f1: float
    frac_unlabeled: float
    frac_labeled: float
    selected_count: int
    pretrained: bool  # False when the selection was empty (baseline fallback)


def sweep_active_sampling(
    dataset: Dataset,
    split: Split,
    fold: int,
    thresholds,
    fine_tune_spec: TrainSpec,
    ae_spec: AePretrainSpec,
    seeds,
    k_range=range(1, 11),
    eval_dataset: Dataset | None = None,
) -> list:
    """Active-vs-random pretraining comparison over NLL thresholds.

    For each threshold and seed, the actively selected unlabeled set and a
    size-matched random set each pretrain an autoencoder that initializes a
    supervised fine-tune; both arms share the seed. An empty selection
    records the no-pretraining baseline, flagged via ``pretrained=False``.
    ``eval_dataset`` may supply a more densely labeled view of the same
    windows for scoring (synthetic benchmarks only).
    """
    thresholds = sorted(thresholds)
    if not fine_tune_spec.uses_pretraining:
        raise ValueError("sweep fine-tune spec must be a pretraining method")
    if eval_dataset is None:
        eval_dataset = dataset
    scaler = fold_scaler(dataset, split, fold)
    unlabeled_idx = _training_pool(dataset, split, fold, labeled=False)
    points = []
    for seed in seeds:
        for threshold in thresholds:
            report, selected, _, _ = active_selection_for_fold(
                dataset, split, fold, fine_tune_spec.network, ae_spec,
                threshold, seed, k_range=k_range, scaler=scaler,
            )
            rng = derived_rng(seed, "sweep-random", repr(threshold))
            n = len(selected)
            random_pool = (
                sorted(rng.choice(unlabeled_idx, size=n, replace=False).tolist())
                if n
                else []
            )
            for arm, pool in (("active", selected), ("random", random_pool)):
                if pool:
                    outcome = pretrain_for_fold(
                        dataset, split, fold, fine_tune_spec.network, ae_spec,
                        seed, pool_indices=pool, scaler=scaler,
                    )
                    result = train(
                        dataset, split, fold, fine_tune_spec,
                        pretrained=outcome.checkpoint, seed=seed,
                    )
                    pretrained = True
                else:
                    baseline_spec = replace(fine_tune_spec, method="baseline")
                    result = train(dataset, split, fold, baseline_spec, seed=seed)
                    pretrained = False
                score = evaluate_checkpoint(result.checkpoint, eval_dataset, split, fold)
                points.append(
                    SweepPoint(
                        threshold=float(threshold),
                        arm=arm,
                        seed=seed,
                        f1=score.f1,
                        frac_unlabeled=(
                            len(pool) / len(unlabeled_idx) if unlabeled_idx else 0.0
                        ),
                        frac_labeled=report.fraction_labeled_below_threshold,
                        selected_count=len(pool),
                        pretrained=pretrained,
                    )
                )
    return points


def summarize_sweep(points: list) -> list:
    """Aggregate sweep points into (threshold, arm, f1 mean/std, fractions)."""
    keys = sorted({(p.threshold, p.arm) for p in points})
    rows = []
    for threshold, arm in keys:
        group = [p for p in points if p.threshold == threshold and p.arm == arm]
        scores = np.array([p.f1 for p in group])
        rows.append(
            {
                "threshold": threshold,
                "arm": arm,
                "f1_mean": float(scores.mean()),
                "f1_std": float(scores.std()),
                "frac_labeled": float(np.mean([p.frac_labeled for p in group])),
                "frac_unlabeled": float(np.mean([p.frac_unlabeled for p in group])),
            }
        )
    return rows


@dataclass
class AblationRow:
    method: str
    seed: int
    fold: int
    f1: float


def run_ablation(
    synth_spec: SynthSpec,
    train_specs: dict,
    ae_spec: AePretrainSpec,
    seeds,
    fold_count: int = 5,
    folds=(0,),
    active_threshold: float | None = None,
    oracle_eval: bool = True,
) -> tuple:
    """Method comparison on freshly generated synthetic datasets.

    Returns (rows, summary) where rows hold per-(method, seed, fold) f1 and
    summary maps method -> (mean, std). A ``random`` row from the chance
    baseline is always included. With ``oracle_eval`` (the default),
    checkpoints are scored on a fully-labeled view of the same generated
    windows, so validation f1 is not quantized by the sparse label budget;
    training still sees only the spec's label fraction.
    """
    rows = []
    for seed in seeds:
        spec_for_seed = synth_spec.with_seed(seed)
        dataset = generate(spec_for_seed)
        eval_dataset = (
            generate(replace(spec_for_seed, label_fraction=1.0)) if oracle_eval else dataset
        )
        split = make_splits(dataset, fold_count, seed)
        for fold in folds:
            train_idx, _ = split.train_val_indices(dataset, fold)
            _, eval_val_idx = split.train_val_indices(eval_dataset, fold)
            train_labels = [
                dataset.windows[i].label for i in train_idx if dataset.windows[i].is_labeled
            ]
            val_labels = [
                eval_dataset.windows[i].label
                for i in eval_val_idx
                if eval_dataset.windows[i].is_labeled
            ]
            if val_labels and train_labels:
                chance_mean, _ = random_baseline(
                    train_labels, val_labels, seed=seed, repetitions=500
                )
                rows.append(AblationRow("random", seed, fold, chance_mean))
            for method, spec in train_specs.items():
                result = train_method(
                    dataset, split, fold, spec, ae_spec, seed,
                    active_threshold=active_threshold,
                )
                score = evaluate_checkpoint(result.checkpoint, eval_dataset, split, fold)
                rows.append(AblationRow(method, seed, fold, score.f1))
    summary = {}
    for method in {r.method for r in rows}:
        scores = np.array([r.f1 for r in rows if r.method == method])
        summary[method] = (float(scores.mean()), float(scores.std()))
    return rows, summary
