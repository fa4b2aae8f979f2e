"""Supervised and semi-supervised training loops.

Methods:
  baseline   cross-entropy on labeled windows
  ae         cross-entropy, initialized from a pretrained autoencoder's
             encoder (the plain pretraining + fine-tune arm)
  da         cross-entropy on labeled windows plus M augmented copies
  da_ae      da, initialized from a pretrained autoencoder's encoder
  da_cr      composite loss: cross-entropy plus labeled and unlabeled
             consistency terms (KL between predictions on clean and
             augmented inputs, clean predictions taken as constants)
  da_ae_cr   da_cr with autoencoder initialization

The clean-prediction passes for consistency targets run in eval mode
(running batch-norm statistics, no dropout) and receive no gradient;
augmented passes run in train mode.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from stressseq.augment import AugmentationSpec, apply_ops
from stressseq.core.rng import derived_rng
from stressseq.core.types import Dataset, Split
from stressseq.nn.checkpoint import Checkpoint
from stressseq.nn.layers import sigmoid
from stressseq.nn.losses import bce_with_logits, kl_bernoulli_from_logits
from stressseq.nn.model import NetworkSpec, SequenceClassifier, init_classifier
from stressseq.nn.optim import Adam
from stressseq.autoencoder import transplant
from stressseq.evaluation import f1_score

METHODS = ("baseline", "ae", "da", "da_ae", "da_cr", "da_ae_cr")

STD_FLOOR = 1e-8


class TrainingDiverged(RuntimeError):
    pass


@dataclass(frozen=True)
class LossWeights:
    """Weights of the composite loss: labeled consistency (alpha), unlabeled
    consistency (lam, serialized as "lambda"), and augmented copies M."""

    alpha: float = 1.0
    lam: float = 1.0
    copies: int = 10

    def __post_init__(self):
        if self.alpha < 0 or self.lam < 0:
            raise ValueError("alpha and lambda must be >= 0")
        if self.copies < 1:
            raise ValueError("M must be >= 1")

    def to_dict(self) -> dict:
        return {"alpha": self.alpha, "lambda": self.lam, "M": self.copies}

    @classmethod
    def from_dict(cls, d: dict) -> "LossWeights":
        return cls(
            alpha=float(d.get("alpha", 1.0)),
            lam=float(d.get("lambda", 1.0)),
            copies=int(d.get("M", 10)),
        )


@dataclass(frozen=True)
class Scaler:
    """Per-feature standardization fit on training-fold windows only."""

    mean: np.ndarray
    std: np.ndarray

    @classmethod
    def fit(cls, windows: np.ndarray) -> "Scaler":
        windows = np.asarray(windows, dtype=np.float64)
        flat = windows.reshape(-1, windows.shape[-1])
        return cls(
            mean=flat.mean(axis=0),
            std=np.maximum(flat.std(axis=0), STD_FLOOR),
        )

    def transform(self, windows: np.ndarray) -> np.ndarray:
        return (np.asarray(windows, dtype=np.float64) - self.mean) / self.std

    def to_dict(self) -> dict:
        return {"mean": self.mean.tolist(), "std": self.std.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "Scaler":
        return cls(mean=np.asarray(d["mean"], dtype=np.float64),
                   std=np.asarray(d["std"], dtype=np.float64))


@dataclass(frozen=True)
class TrainSpec:
    method: str
    network: NetworkSpec
    epochs: int = 50
    batch_size: int = 8
    learning_rate: float = 1e-4
    loss_weights: LossWeights = LossWeights()
    augmentation: AugmentationSpec = AugmentationSpec()
    unlabeled_batch_ratio: float = 1.0

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}; known: {METHODS}")
        if self.uses_augmentation and not self.augmentation.ops:
            raise ValueError(f"method {self.method} requires augmentation ops")

    @property
    def uses_augmentation(self) -> bool:
        return self.method not in ("baseline", "ae")

    @property
    def uses_consistency(self) -> bool:
        return self.method in ("da_cr", "da_ae_cr")

    @property
    def uses_pretraining(self) -> bool:
        return self.method in ("ae", "da_ae", "da_ae_cr")


@dataclass
class CompositeLossResult:
    loss: float
    grads: dict
    bce: float
    kl_labeled: float
    kl_unlabeled: float


def _accumulate(total: dict, grads: dict, scale: float = 1.0) -> None:
    for name, g in grads.items():
        if name in total:
            total[name] = total[name] + scale * g
        else:
            total[name] = scale * g


def consistency_targets(model: SequenceClassifier, x_labeled, x_unlabeled=None):
    """Clean-input predictions used as constant KL targets (eval mode)."""
    p_labeled = sigmoid(model.forward(x_labeled, mode="eval")[0])
    p_unlabeled = None
    if x_unlabeled is not None and len(x_unlabeled):
        p_unlabeled = sigmoid(model.forward(x_unlabeled, mode="eval")[0])
    return p_labeled, p_unlabeled


def composite_loss(
    model: SequenceClassifier,
    x_labeled: np.ndarray,
    y: np.ndarray,
    x_unlabeled: np.ndarray | None,
    weights: LossWeights,
    aug_fn,
    rng: np.random.Generator,
    targets=None,
) -> CompositeLossResult:
    """Cross-entropy plus weighted consistency terms, with gradients.

    loss = BCE(x_l, y) + (alpha/M) sum_m KL(p(x_l) || p(aug_m(x_l)))
                       + (lambda/M) sum_m KL(p(x_u) || p(aug_m(x_u)))

    ``aug_fn(batch, copy_index, rng)`` produces one augmented copy.
    ``targets`` may inject fixed clean predictions (used by gradient
    checks); by default they are recomputed in eval mode each call and are
    always treated as constants. With alpha = lambda = 0 the result is the
    plain cross-entropy, bit for bit.
    """
    grads: dict = {}
    logits, cache = model.forward(x_labeled, mode="train", rng=rng)
    bce, d_logits = bce_with_logits(logits, y)
    if not np.isfinite(bce):
        raise TrainingDiverged("cross-entropy term became non-finite")
    g, _ = model.backward(cache, d_logits)
    _accumulate(grads, g)

    kl_labeled = 0.0
    kl_unlabeled = 0.0
    m = weights.copies
    has_unlabeled = x_unlabeled is not None and len(x_unlabeled) > 0
    if weights.alpha > 0 or (weights.lam > 0 and has_unlabeled):
        if targets is None:
            p_labeled, p_unlabeled = consistency_targets(
                model, x_labeled, x_unlabeled if has_unlabeled else None
            )
        else:
            p_labeled, p_unlabeled = targets
        for copy_index in range(m):
            if weights.alpha > 0:
                x_aug = aug_fn(x_labeled, copy_index, rng)
                logits_aug, cache_aug = model.forward(x_aug, mode="train", rng=rng)
                kl, d_kl = kl_bernoulli_from_logits(p_labeled, logits_aug)
                kl_labeled += kl
                g, _ = model.backward(cache_aug, d_kl * (weights.alpha / m))
                _accumulate(grads, g)
            if weights.lam > 0 and has_unlabeled and p_unlabeled is not None:
                x_aug = aug_fn(x_unlabeled, copy_index, rng)
                logits_aug, cache_aug = model.forward(x_aug, mode="train", rng=rng)
                kl, d_kl = kl_bernoulli_from_logits(p_unlabeled, logits_aug)
                kl_unlabeled += kl
                g, _ = model.backward(cache_aug, d_kl * (weights.lam / m))
                _accumulate(grads, g)

    term_labeled = weights.alpha * kl_labeled / m
    term_unlabeled = weights.lam * kl_unlabeled / m
    for name, value in (("labeled KL", term_labeled), ("unlabeled KL", term_unlabeled)):
        if not np.isfinite(value):
            raise TrainingDiverged(f"{name} term became non-finite")
    loss = bce + term_labeled + term_unlabeled
    return CompositeLossResult(
        loss=loss,
        grads=grads,
        bce=bce,
        kl_labeled=term_labeled,
        kl_unlabeled=term_unlabeled,
    )


def augmentation_fn(spec: AugmentationSpec):
    """Batch augmentation closure: fresh randomness per call from the rng."""

    def fn(batch: np.ndarray, copy_index: int, rng: np.random.Generator) -> np.ndarray:
        return np.stack([apply_ops(w, spec, rng) for w in batch])

    return fn


@dataclass
class TrainingLog:
    rows: list = field(default_factory=list)  # (epoch, loss_ce, kl_l, kl_u, val_f1)
    initial_val_f1: float = float("nan")
    initial_val_bce: float = float("nan")
    best_epoch: int = -1
    best_val_f1: float = float("nan")
    scaler_participants: tuple = ()
    pretrain_participants: tuple = ()


@dataclass
class TrainResult:
    checkpoint: Checkpoint
    log: TrainingLog
    scaler: Scaler


def _batches(indices: np.ndarray, batch_size: int):
    """Consecutive batches; a trailing singleton is merged into its
    predecessor so batch normalization always sees at least two samples."""
    chunks = [indices[i : i + batch_size] for i in range(0, len(indices), batch_size)]
    if len(chunks) > 1 and len(chunks[-1]) == 1:
        chunks[-2] = np.concatenate([chunks[-2], chunks[-1]])
        chunks.pop()
    return chunks


class _UnlabeledCycler:
    """Cycles through the unlabeled pool in seeded shuffled order."""

    def __init__(self, count: int, rng: np.random.Generator):
        self.count = count
        self.rng = rng
        self.order = rng.permutation(count) if count else np.array([], dtype=int)
        self.cursor = 0

    def take(self, n: int) -> np.ndarray:
        if self.count == 0 or n <= 0:
            return np.array([], dtype=int)
        out = []
        while len(out) < n:
            if self.cursor >= self.count:
                self.order = self.rng.permutation(self.count)
                self.cursor = 0
            out.append(self.order[self.cursor])
            self.cursor += 1
        return np.array(out, dtype=int)


def train(
    dataset: Dataset,
    split: Split,
    fold: int,
    spec: TrainSpec,
    pretrained: Checkpoint | None = None,
    seed: int = 0,
) -> TrainResult:
    """Train on the training side of ``fold``; keep the best-validation-f1
    epoch. The scaler and all optimization inputs come from training-fold
    participants only."""
    if spec.uses_pretraining and pretrained is None:
        raise ValueError(f"method {spec.method} requires a pretrained autoencoder")

    train_idx, val_idx = split.train_val_indices(dataset, fold)
    train_subset = [dataset.windows[i] for i in train_idx]
    labeled = [w for w in train_subset if w.is_labeled]
    unlabeled = [w for w in train_subset if not w.is_labeled]
    if not labeled:
        raise ValueError(f"fold {fold} has no labeled training windows")
    val_labeled = [dataset.windows[i] for i in val_idx if dataset.windows[i].is_labeled]

    scaler = Scaler.fit(np.stack([w.features for w in train_subset]))
    x_labeled = scaler.transform(np.stack([w.features for w in labeled]))
    y = np.array([w.label for w in labeled], dtype=np.float64)
    x_unlabeled = (
        scaler.transform(np.stack([w.features for w in unlabeled])) if unlabeled else None
    )
    x_val = (
        scaler.transform(np.stack([w.features for w in val_labeled]))
        if val_labeled
        else None
    )
    y_val = np.array([w.label for w in val_labeled], dtype=np.float64)

    network = spec.network.with_input_dim(dataset.n_features)
    if spec.uses_pretraining:
        model = transplant(pretrained, network, seed)
        pretrain_participants = tuple(pretrained.meta.get("source_participants", ()))
    else:
        model = init_classifier(network, seed)
        pretrain_participants = ()

    rng = derived_rng(seed, "train", fold)
    optimizer = Adam(spec.learning_rate)
    aug_fn = augmentation_fn(spec.augmentation)
    weights = spec.loss_weights

    log = TrainingLog(
        scaler_participants=tuple(sorted({w.participant_id for w in train_subset})),
        pretrain_participants=pretrain_participants,
    )

    def validate():
        if x_val is None or not len(y_val):
            return float("nan"), float("nan")
        logits, _ = model.forward(x_val, mode="eval")
        probs = sigmoid(logits)
        bce, _ = bce_with_logits(logits, y_val)
        return f1_score(probs, y_val), bce

    log.initial_val_f1, log.initial_val_bce = validate()
    best = model.copy()
    best_f1 = -1.0
    best_epoch = 0

    unlabeled_cycler = _UnlabeledCycler(len(unlabeled), derived_rng(seed, "unlabeled", fold))
    n_labeled = len(labeled)

    for epoch in range(1, spec.epochs + 1):
        order = rng.permutation(n_labeled)
        epoch_bce, epoch_kl_l, epoch_kl_u = [], [], []
        for batch_idx in _batches(order, spec.batch_size):
            xb, yb = x_labeled[batch_idx], y[batch_idx]
            if spec.uses_consistency:
                n_u = int(round(spec.unlabeled_batch_ratio * len(batch_idx)))
                u_idx = unlabeled_cycler.take(min(n_u, len(unlabeled)))
                xu = x_unlabeled[u_idx] if len(u_idx) else None
                result = composite_loss(model, xb, yb, xu, weights, aug_fn, rng)
                grads = result.grads
                epoch_bce.append(result.bce)
                epoch_kl_l.append(result.kl_labeled)
                epoch_kl_u.append(result.kl_unlabeled)
            else:
                if spec.uses_augmentation:
                    copies = [aug_fn(xb, m, rng) for m in range(weights.copies)]
                    xb = np.concatenate([xb] + copies)
                    yb = np.tile(yb, weights.copies + 1)
                logits, cache = model.forward(xb, mode="train", rng=rng)
                bce, d_logits = bce_with_logits(logits, yb)
                if not np.isfinite(bce):
                    raise TrainingDiverged("cross-entropy became non-finite")
                grads, _ = model.backward(cache, d_logits)
                epoch_bce.append(bce)
                epoch_kl_l.append(0.0)
                epoch_kl_u.append(0.0)
            optimizer.step(model.params, grads)
        val_f1, _ = validate()
        log.rows.append(
            (
                epoch,
                float(np.mean(epoch_bce)),
                float(np.mean(epoch_kl_l)),
                float(np.mean(epoch_kl_u)),
                val_f1,
            )
        )
        if np.isfinite(val_f1) and val_f1 > best_f1:
            best_f1 = val_f1
            best_epoch = epoch
            best = model.copy()

    if best_f1 < 0:  # no validation labels; keep the final model
        best = model.copy()
        best_epoch = spec.epochs
        best_f1 = float("nan")
    log.best_epoch = best_epoch
    log.best_val_f1 = best_f1

    checkpoint = Checkpoint(
        kind="classifier",
        network=network.to_dict(),
        params=best.params,
        state=best.bn_state,
        meta={
            "method": spec.method,
            "seed": seed,
            "fold": fold,
            "fold_count": split.fold_count,
            "best_epoch": best_epoch,
            "best_val_f1": best_f1,
            "split_assignments": dict(split.assignments),
            "scaler": scaler.to_dict(),
            "scaler_participants": list(log.scaler_participants),
            "pretrain_participants": list(pretrain_participants),
            "feature_names": list(dataset.feature_names),
            "step_resolution_minutes": dataset.step_resolution,
        },
    )
    return TrainResult(checkpoint=checkpoint, log=log, scaler=scaler)


def predict(checkpoint: Checkpoint, windows: np.ndarray) -> np.ndarray:
    """Probabilities for raw (unstandardized) windows, standardized with the
    checkpoint's stored scaler. Deterministic eval-mode pass."""
    model = checkpoint.to_classifier()
    scaler = Scaler.from_dict(checkpoint.meta["scaler"])
    windows = np.asarray(windows, dtype=np.float64)
    if windows.ndim != 3 or windows.shape[2] != model.spec.input_dim:
        raise ValueError(
            f"expected (N, T, {model.spec.input_dim}) windows, got {windows.shape}"
        )
    return model.predict_proba(scaler.transform(windows))


def audit_fold_isolation(result: TrainResult, dataset: Dataset, split: Split, fold: int):
    """Verify no validation-fold participant fed the scaler or pretraining,
    and that the stored scaler is exactly the training-fold scaler."""
    val_participants = set(split.fold_participants(fold))
    leaked = val_participants & set(result.log.scaler_participants)
    if leaked:
        raise AssertionError(f"scaler saw validation participants: {sorted(leaked)}")
    leaked = val_participants & set(result.log.pretrain_participants)
    if leaked:
        raise AssertionError(f"pretraining saw validation participants: {sorted(leaked)}")
    train_idx, _ = split.train_val_indices(dataset, fold)
    expected = Scaler.fit(np.stack([dataset.windows[i].features for i in train_idx]))
    if not (
        np.array_equal(expected.mean, result.scaler.mean)
        and np.array_equal(expected.std, result.scaler.std)
    ):
        raise AssertionError("stored scaler differs from the training-fold scaler")
