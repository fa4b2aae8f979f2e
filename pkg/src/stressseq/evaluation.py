"""Metrics: f1, confusion matrices, chance baseline, sub-level accuracy,
and paired significance tests."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from stressseq.core.rng import derived_rng


def _binarize_predictions(predictions, threshold: float) -> np.ndarray:
    return (np.asarray(predictions, dtype=np.float64) >= threshold).astype(int)


def confusion_matrix(predictions, labels, threshold: float = 0.5) -> np.ndarray:
    """2x2 counts indexed [true label][predicted label]."""
    pred = _binarize_predictions(predictions, threshold)
    true = np.asarray(labels, dtype=int)
    matrix = np.zeros((2, 2), dtype=int)
    for t, p in zip(true, pred):
        matrix[t, p] += 1
    return matrix


def precision_recall(matrix: np.ndarray, positive: int = 1) -> tuple:
    tp = matrix[positive, positive]
    fp = matrix[1 - positive, positive]
    fn = matrix[positive, 1 - positive]
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    return float(precision), float(recall)


def f1_from_matrix(matrix: np.ndarray, positive: int = 1) -> float:
    precision, recall = precision_recall(matrix, positive)
    if precision + recall == 0:
        return 0.0
    return 2.0 * precision * recall / (precision + recall)


def f1_score(predictions, labels, threshold: float = 0.5) -> float:
    """f1 of the positive (stressed) class; 0 when precision+recall is 0."""
    if len(np.asarray(labels)) == 0:
        raise ValueError("cannot score an empty set")
    return f1_from_matrix(confusion_matrix(predictions, labels, threshold))


def macro_f1(predictions, labels, threshold: float = 0.5) -> float:
    matrix = confusion_matrix(predictions, labels, threshold)
    return 0.5 * (f1_from_matrix(matrix, positive=1) + f1_from_matrix(matrix, positive=0))


@dataclass(frozen=True)
class EvalReport:
    f1: float
    macro_f1: float
    precision: dict  # class -> precision
    recall: dict
    confusion: np.ndarray
    per_sublevel_accuracy: dict  # raw level -> (count, accuracy)
    fold: int = -1
    seed: int = -1

    def rows(self) -> list:
        """Flat key/value rows for CSV reports."""
        out = [
            ("f1", self.f1),
            ("macro_f1", self.macro_f1),
            ("precision_stressed", self.precision[1]),
            ("precision_non_stressed", self.precision[0]),
            ("recall_stressed", self.recall[1]),
            ("recall_non_stressed", self.recall[0]),
            ("tn", int(self.confusion[0, 0])),
            ("fp", int(self.confusion[0, 1])),
            ("fn", int(self.confusion[1, 0])),
            ("tp", int(self.confusion[1, 1])),
            ("fold", self.fold),
            ("seed", self.seed),
        ]
        for level in sorted(self.per_sublevel_accuracy):
            count, acc = self.per_sublevel_accuracy[level]
            out.append((f"sublevel_{level}_count", count))
            out.append((f"sublevel_{level}_accuracy", acc))
        return out


def evaluate_predictions(
    predictions,
    labels,
    raw_levels=None,
    threshold: float = 0.5,
    fold: int = -1,
    seed: int = -1,
) -> EvalReport:
    matrix = confusion_matrix(predictions, labels, threshold)
    p1, r1 = precision_recall(matrix, positive=1)
    p0, r0 = precision_recall(matrix, positive=0)
    sublevels = {}
    if raw_levels is not None:
        sublevels = sublevel_accuracy(predictions, labels, raw_levels, threshold)
    return EvalReport(
        f1=f1_from_matrix(matrix),
        macro_f1=0.5 * (f1_from_matrix(matrix, 1) + f1_from_matrix(matrix, 0)),
        precision={0: p0, 1: p1},
        recall={0: r0, 1: r1},
        confusion=matrix,
        per_sublevel_accuracy=sublevels,
        fold=fold,
        seed=seed,
    )


def sublevel_accuracy(predictions, labels, raw_levels, threshold: float = 0.5) -> dict:
    """Fraction of windows per original self-report level whose binary
    prediction matches the binarized label. Windows without a raw level are
    skipped."""
    pred = _binarize_predictions(predictions, threshold)
    true = np.asarray(labels, dtype=int)
    per_level: dict = {}
    for p, t, level in zip(pred, true, raw_levels):
        if level is None:
            continue
        hits, count = per_level.get(int(level), (0, 0))
        per_level[int(level)] = (hits + int(p == t), count + 1)
    return {
        level: (count, hits / count) for level, (hits, count) in sorted(per_level.items())
    }


def random_baseline(
    train_labels,
    test_labels,
    seed: int = 0,
    repetitions: int = 1000,
) -> tuple:
    """Chance-level f1: predictions drawn i.i.d. with the training-set
    positive-class probability, scored against the test labels. Returns
    (mean, std) over repetitions."""
    if repetitions < 100:
        raise ValueError("need at least 100 repetitions")
    train_labels = np.asarray(train_labels, dtype=int)
    test_labels = np.asarray(test_labels, dtype=int)
    p_stressed = float(np.mean(train_labels))
    rng = derived_rng(seed, "random-baseline")
    scores = np.empty(repetitions)
    for i in range(repetitions):
        draws = (rng.random(test_labels.size) < p_stressed).astype(int)
        scores[i] = f1_score(draws, test_labels)
    return float(np.mean(scores)), float(np.std(scores))


@dataclass(frozen=True)
class PairedTestResult:
    t_statistic: float
    p_value: float
    n: int
    mean_difference: float
    exact_tie: bool = False
    one_sided: bool = False


def paired_tests(results_a, results_b, one_sided: bool = False) -> PairedTestResult:
    """Paired t-test on equal-length samples.

    Two-sided by default; ``one_sided`` tests mean(a - b) > 0. Differences
    with zero variance take the exact-tie path instead of dividing by zero:
    all-zero differences give t=0, p=1, and a constant nonzero difference is
    a deterministic effect (p=0).
    """
    a = np.asarray(results_a, dtype=np.float64)
    b = np.asarray(results_b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1:
        raise ValueError("need equal-length 1-D paired samples")
    n = a.size
    if n < 2:
        raise ValueError("need at least 2 pairs")
    diff = a - b
    mean_diff = float(np.mean(diff))
    sd = float(np.std(diff, ddof=1))
    if sd == 0.0:
        if mean_diff == 0.0:
            return PairedTestResult(0.0, 1.0, n, 0.0, exact_tie=True, one_sided=one_sided)
        direction_ok = (mean_diff > 0) if one_sided else True
        return PairedTestResult(
            float(np.sign(mean_diff)) * float("inf"),
            0.0 if direction_ok else 1.0,
            n,
            mean_diff,
            exact_tie=True,
            one_sided=one_sided,
        )
    t_stat = mean_diff / (sd / np.sqrt(n))
    if one_sided:
        p = float(stats.t.sf(t_stat, df=n - 1))
    else:
        p = float(2.0 * stats.t.sf(abs(t_stat), df=n - 1))
    return PairedTestResult(float(t_stat), p, n, mean_diff, one_sided=one_sided)
