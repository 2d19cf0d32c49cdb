"""Performance metrics, the cross-validation protocol, and correlation.

AUC uses the rank-based Mann-Whitney statistic with ties counted 0.5
(a constant classifier scores 0.5, not 0). Threshold metrics (accuracy,
worst-group accuracy, disparity) share a single threshold chosen once per
experiment on pooled validation predictions. Aggregation averages across
folds first and then across repeats; standard errors use N = repeats.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from scipy.stats import t as student_t

from .dataset import Source, SplitSpec, stratified_folds
from .errors import (
    DegenerateVariance,
    NoEligibleGroups,
    SingleClass,
)
from .models import apply_scaler, fit_logistic, fit_scaler, predict_proba, scaled_l2

DEFAULT_MIN_GROUP_SIZE = 10


class MetricKind(str, Enum):
    AUC = "auc"
    ACCURACY = "accuracy"
    WORST_GROUP_ACCURACY = "worst_group_accuracy"
    DISPARITY = "disparity"


@dataclass(frozen=True)
class ExperimentConfig:
    """Task-model hyperparameters shared by every experiment cell.

    ``l2`` is quoted against the summed loss (1.0 matches common tooling
    defaults) and rescaled to each cell's training size before fitting.
    """

    l2: float = 1.0
    tol: float = 1e-6
    max_iters: int = 1000
    min_group_size: int = DEFAULT_MIN_GROUP_SIZE


@dataclass(frozen=True)
class MetricRecord:
    metric: MetricKind
    value: float
    fold: int
    repeat: int
    threshold: float | None
    group_sizes: dict[str, int] = field(default_factory=dict)


@dataclass(frozen=True)
class ExperimentResult:
    """Per-cell records plus fold-then-repeat aggregated mean and stderr."""

    records: tuple[MetricRecord, ...]
    mean: dict[MetricKind, float]
    stderr: dict[MetricKind, float]

    def to_dict(self) -> dict:
        return {
            "records": [
                {
                    "metric": r.metric.value,
                    "value": r.value,
                    "fold": r.fold,
                    "repeat": r.repeat,
                    "threshold": r.threshold,
                    "group_sizes": dict(sorted(r.group_sizes.items())),
                }
                for r in self.records
            ],
            "mean": {k.value: v for k, v in sorted(self.mean.items())},
            "stderr": {k.value: v for k, v in sorted(self.stderr.items())},
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def auc(scores, labels) -> float:
    """Mann-Whitney AUC via average ranks, O(n log n), ties counted 0.5."""
    s = np.asarray(scores, dtype=float)
    y = np.asarray(labels, dtype=int)
    n_pos = int((y == 1).sum())
    n_neg = int((y == 0).sum())
    if n_pos == 0 or n_neg == 0:
        raise SingleClass("AUC needs at least one positive and one negative label")
    _, inverse, counts = np.unique(s, return_inverse=True, return_counts=True)
    ends = np.cumsum(counts)
    starts = ends - counts + 1
    avg_ranks = (starts + ends) / 2.0
    ranks = avg_ranks[inverse]
    rank_sum_pos = float(ranks[y == 1].sum())
    return (rank_sum_pos - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg)


def accuracy_at_threshold(scores, labels, threshold: float) -> float:
    """Mean of 1[(score >= threshold) == label]."""
    if not 0.0 <= threshold <= 1.0:
        raise ValueError("threshold must lie in [0, 1]")
    s = np.asarray(scores, dtype=float)
    y = np.asarray(labels, dtype=int)
    return float(((s >= threshold).astype(int) == y).mean())


def group_accuracies(
    scores, labels, groups, threshold: float, min_group_size: int = DEFAULT_MIN_GROUP_SIZE
) -> tuple[dict[str, tuple[int, float]], list[str]]:
    """Per-group (size, accuracy) plus the list of eligible group ids.

    Groups smaller than ``min_group_size`` are excluded from group metrics
    but still reported with their sizes.
    """
    s = np.asarray(scores, dtype=float)
    y = np.asarray(labels, dtype=int)
    g = np.asarray(groups, dtype=str)
    pred = (s >= threshold).astype(int)
    table: dict[str, tuple[int, float]] = {}
    for gid in sorted(np.unique(g)):
        mask = g == gid
        table[gid] = (int(mask.sum()), float((pred[mask] == y[mask]).mean()))
    eligible = [gid for gid, (n, _) in table.items() if n >= min_group_size]
    return table, eligible


def worst_group_accuracy(
    scores, labels, groups, threshold: float, min_group_size: int = DEFAULT_MIN_GROUP_SIZE
) -> tuple[str, float]:
    """Minimum per-group accuracy over eligible groups (lexicographic ties)."""
    table, eligible = group_accuracies(scores, labels, groups, threshold, min_group_size)
    if not eligible:
        raise NoEligibleGroups(f"no group reaches min_group_size={min_group_size}")
    worst = min(eligible, key=lambda gid: (table[gid][1], gid))
    return worst, table[worst][1]


def disparity(
    scores, labels, groups, threshold: float, min_group_size: int = DEFAULT_MIN_GROUP_SIZE
) -> float:
    """Best-group accuracy minus worst-group accuracy over eligible groups."""
    table, eligible = group_accuracies(scores, labels, groups, threshold, min_group_size)
    if not eligible:
        raise NoEligibleGroups(f"no group reaches min_group_size={min_group_size}")
    accs = [table[gid][1] for gid in eligible]
    return float(max(accs) - min(accs))


THRESHOLD_GRID = tuple(i / 100.0 for i in range(101))


def choose_threshold(validation_sets) -> float:
    """Single threshold maximizing pooled balanced accuracy on a 101-point grid.

    ``validation_sets`` is a sequence of (scores, labels) pairs which are
    pooled before the scan. Ties break toward 0.5, then toward the smaller
    threshold, so selection is deterministic.
    """
    score_parts = [np.asarray(s, dtype=float) for s, _ in validation_sets]
    label_parts = [np.asarray(y, dtype=int) for _, y in validation_sets]
    if not score_parts or sum(p.size for p in score_parts) == 0:
        raise SingleClass("no validation predictions to choose a threshold from")
    s = np.concatenate(score_parts)
    y = np.concatenate(label_parts)
    pos = s[y == 1]
    neg = s[y == 0]
    if pos.size == 0 or neg.size == 0:
        raise SingleClass("threshold selection needs both classes in validation")
    best_t, best_ba = None, -1.0
    for t in THRESHOLD_GRID:
        tpr = float((pos >= t).mean())
        tnr = float((neg < t).mean())
        ba = (tpr + tnr) / 2.0
        if ba > best_ba or (
            ba == best_ba and (abs(t - 0.5), t) < (abs(best_t - 0.5), best_t)
        ):
            best_t, best_ba = t, ba
    return float(best_t)


def pearson(x, y) -> tuple[float, float]:
    """Sample Pearson r with a two-sided Student-t p-value (df = n - 2)."""
    xv = np.asarray(x, dtype=float)
    yv = np.asarray(y, dtype=float)
    if xv.shape != yv.shape or xv.ndim != 1:
        raise ValueError("x and y must be 1-D vectors of equal length")
    n = xv.size
    if n < 3:
        raise DegenerateVariance("pearson needs n >= 3")
    xc = xv - xv.mean()
    yc = yv - yv.mean()
    sx = float(np.sqrt((xc @ xc)))
    sy = float(np.sqrt((yc @ yc)))
    if sx == 0.0 or sy == 0.0:
        raise DegenerateVariance("zero variance in correlation input")
    r = float(np.clip((xc @ yc) / (sx * sy), -1.0, 1.0))
    if abs(r) == 1.0:
        return r, 0.0
    t_stat = r * np.sqrt((n - 2) / (1.0 - r * r))
    p = float(2.0 * student_t.sf(abs(t_stat), df=n - 2))
    return r, p


def run_experiment(
    train_pool: Source,
    test: Source,
    split: SplitSpec,
    config: ExperimentConfig | None = None,
) -> ExperimentResult:
    """Cross-validated fit/evaluate protocol against a fixed test source.

    Per (repeat, fold): standardize and fit on the training portion and
    predict on both the validation portion and the test source. One
    threshold is then chosen on the pooled validation predictions of the
    whole experiment and every cell's threshold metrics are computed on
    the test source at that threshold.
    """
    config = config or ExperimentConfig()
    folds_by_repeat = stratified_folds(train_pool, split)
    cells = []
    validation_sets = []
    for repeat, folds in enumerate(folds_by_repeat):
        for fold, (train_idx, val_idx) in enumerate(folds):
            scaler = fit_scaler(train_pool.features[train_idx])
            model = fit_logistic(
                apply_scaler(scaler, train_pool.features[train_idx]),
                train_pool.labels[train_idx],
                l2=scaled_l2(config.l2, train_idx.size),
                tol=config.tol,
                max_iters=config.max_iters,
            )
            val_scores = predict_proba(model, apply_scaler(scaler, train_pool.features[val_idx]))
            test_scores = predict_proba(model, apply_scaler(scaler, test.features))
            validation_sets.append((val_scores, train_pool.labels[val_idx]))
            cells.append((repeat, fold, test_scores))

    threshold = choose_threshold(validation_sets)
    group_sizes = {
        gid: int((test.groups == gid).sum()) for gid in sorted(np.unique(test.groups))
    }

    records: list[MetricRecord] = []
    for repeat, fold, test_scores in cells:
        records.append(
            MetricRecord(MetricKind.AUC, auc(test_scores, test.labels), fold, repeat, None, group_sizes)
        )
        records.append(
            MetricRecord(
                MetricKind.ACCURACY,
                accuracy_at_threshold(test_scores, test.labels, threshold),
                fold,
                repeat,
                threshold,
                group_sizes,
            )
        )
        _, worst = worst_group_accuracy(
            test_scores, test.labels, test.groups, threshold, config.min_group_size
        )
        records.append(
            MetricRecord(MetricKind.WORST_GROUP_ACCURACY, worst, fold, repeat, threshold, group_sizes)
        )
        records.append(
            MetricRecord(
                MetricKind.DISPARITY,
                disparity(test_scores, test.labels, test.groups, threshold, config.min_group_size),
                fold,
                repeat,
                threshold,
                group_sizes,
            )
        )
    return _aggregate(records, n_repeats=split.n_repeats)


def _aggregate(records: list[MetricRecord], n_repeats: int) -> ExperimentResult:
    mean: dict[MetricKind, float] = {}
    stderr: dict[MetricKind, float] = {}
    for kind in MetricKind:
        repeat_means = []
        for repeat in range(n_repeats):
            values = [r.value for r in records if r.metric == kind and r.repeat == repeat]
            if values:
                repeat_means.append(float(np.mean(values)))
        if not repeat_means:
            continue
        mean[kind] = float(np.mean(repeat_means))
        if len(repeat_means) > 1:
            stderr[kind] = float(np.std(repeat_means, ddof=1) / np.sqrt(len(repeat_means)))
        else:
            stderr[kind] = 0.0
    return ExperimentResult(records=tuple(records), mean=mean, stderr=stderr)
