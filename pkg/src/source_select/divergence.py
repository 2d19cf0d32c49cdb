"""Distribution-distance heuristics between data sources.

The workhorse is a clipped probabilistic domain classifier s trained to
give label 1 to rows of P and 0 to rows of Q. From it come two families
of estimates, each in an X (features only) and an XY (features plus the
label column) variant:

* Score: the mean classifier output over P, a bounded divergence proxy.
* KL-Ratio: the mean of log(s / (1 - s)) over P, using the density-ratio
  identity r(x) = P(x)/Q(x) = s/(1 - s).

Alongside these: Euclidean distances between normative group summaries,
a KDE-on-PCA-projections KL estimate, the excess-KL decision heuristic,
and exact KL for finite pmfs. Estimates are asymmetric in general:
kl_ratio(P -> Q) need not equal kl_ratio(Q -> P).
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .dataset import Source
from .errors import (
    AbsoluteContinuityViolation,
    DegenerateCovariance,
    DimensionMismatch,
    EmptySource,
    GroupVocabularyMismatch,
    NotEnoughRows,
    SchemaMismatch,
)
from .evaluation import auc
from .models import (
    LogisticModel,
    Scaler,
    apply_scaler,
    fit_logistic,
    fit_scaler,
    predict_proba,
    scaled_l2,
)
from .seeding import derive_seed

CLIP_LOW = 0.01
CLIP_HIGH = 0.99
DENSITY_FLOOR = 1e-12


class Metric(str, Enum):
    """Which divergence heuristic produced an estimate."""

    SCORE_X = "score_x"
    SCORE_XY = "score_xy"
    KL_RATIO_X = "kl_ratio_x"
    KL_RATIO_XY = "kl_ratio_xy"
    NORMATIVE = "normative"
    KDE_PCA_KL = "kde_pca_kl"
    EXACT_KL = "exact_kl"


CLASSIFIER_METRICS = (Metric.SCORE_X, Metric.SCORE_XY, Metric.KL_RATIO_X, Metric.KL_RATIO_XY)
XY_METRICS = (Metric.SCORE_XY, Metric.KL_RATIO_XY)


class Facet(str, Enum):
    """Which slice of a group summary a normative distance compares."""

    PROPORTIONS = "proportions"
    OUTCOME_RATES = "outcome_rates"
    BOTH = "both"


@dataclass(frozen=True)
class DivergenceEstimate:
    kind: Metric
    value: float
    n_p: int
    n_q: int
    seed: int

    def to_dict(self) -> dict:
        return {
            "kind": self.kind.value,
            "value": self.value,
            "n_p": self.n_p,
            "n_q": self.n_q,
            "seed": self.seed,
        }


@dataclass(frozen=True)
class DomainClassifier:
    """Fitted discriminator s between two samples, with clipped outputs."""

    model: LogisticModel
    scaler: Scaler
    uses_labels: bool
    n_p: int
    n_q: int
    seed: int
    clip: tuple[float, float] = (CLIP_LOW, CLIP_HIGH)

    def scores(self, source: Source) -> np.ndarray:
        """Clipped P-membership probabilities for every row of ``source``."""
        features = _stack_features(source, self.uses_labels)
        if features.shape[1] != self.scaler.means.shape[0]:
            raise DimensionMismatch(
                f"classifier expects d={self.scaler.means.shape[0]}, "
                f"source {source.id!r} provides {features.shape[1]}"
            )
        raw = predict_proba(self.model, apply_scaler(self.scaler, features))
        return np.clip(raw, self.clip[0], self.clip[1])


def _stack_features(source: Source, uses_labels: bool) -> np.ndarray:
    if uses_labels:
        return np.hstack([source.features, source.labels.reshape(-1, 1).astype(float)])
    return source.features


def fit_domain_classifier(
    P: Source,
    Q: Source,
    uses_labels: bool,
    seed: int,
    l2: float = 1.0,
) -> DomainClassifier:
    """Fit s on the pooled standardized rows of P (label 1) and Q (label 0).

    Class imbalance between |P| and |Q| is handled with inverse-frequency
    example weights so s targets the balanced posterior. ``l2`` is a
    summed-loss ridge strength (1.0 matches common tooling defaults) and
    is rescaled to the pooled sample size internally. The fit is
    deterministic; the seed is recorded so estimates stay traceable to the
    draw that produced their inputs.
    """
    if P.n_rows == 0 or Q.n_rows == 0:
        raise EmptySource("both P and Q need at least one row")
    if P.feature_names != Q.feature_names:
        raise SchemaMismatch(f"{P.id!r} and {Q.id!r} have different feature names")
    pooled = np.vstack([_stack_features(P, uses_labels), _stack_features(Q, uses_labels)])
    membership = np.concatenate([np.ones(P.n_rows), np.zeros(Q.n_rows)])
    n = P.n_rows + Q.n_rows
    weights = np.where(membership == 1, n / (2.0 * P.n_rows), n / (2.0 * Q.n_rows))
    scaler = fit_scaler(pooled)
    model = fit_logistic(
        apply_scaler(scaler, pooled), membership, l2=scaled_l2(l2, n), sample_weight=weights
    )
    return DomainClassifier(
        model=model,
        scaler=scaler,
        uses_labels=uses_labels,
        n_p=P.n_rows,
        n_q=Q.n_rows,
        seed=seed,
    )


def discrimination_auc(P: Source, Q: Source, uses_labels: bool, seed: int) -> float:
    """Held-out AUC of a P-vs-Q classifier (diagnostic, not a heuristic).

    Half of each sample (split with the derived seed) trains the
    classifier; the AUC of its scores on the held-out halves measures how
    separable the two samples are. 0.5 means indistinguishable.
    """
    if P.n_rows < 2 or Q.n_rows < 2:
        raise EmptySource("held-out discrimination needs >= 2 rows per side")
    rng = np.random.default_rng(derive_seed(seed, "disc-auc"))

    def halves(source):
        perm = rng.permutation(source.n_rows)
        cut = source.n_rows // 2
        return source.take(np.sort(perm[:cut])), source.take(np.sort(perm[cut:]))

    p_fit, p_eval = halves(P)
    q_fit, q_eval = halves(Q)
    clf = fit_domain_classifier(p_fit, q_fit, uses_labels, seed)
    scores = np.concatenate([clf.scores(p_eval), clf.scores(q_eval)])
    membership = np.concatenate([np.ones(p_eval.n_rows), np.zeros(q_eval.n_rows)])
    return auc(scores, membership)


def score_distance(clf: DomainClassifier, P: Source) -> DivergenceEstimate:
    """Mean clipped classifier score over P's rows."""
    value = float(clf.scores(P).mean())
    kind = Metric.SCORE_XY if clf.uses_labels else Metric.SCORE_X
    return DivergenceEstimate(kind=kind, value=value, n_p=clf.n_p, n_q=clf.n_q, seed=clf.seed)


def kl_ratio(clf: DomainClassifier, P: Source) -> DivergenceEstimate:
    """KL(P || Q) estimate: mean over P of log(s / (1 - s)) with clipped s.

    Clipping bounds the value inside [-ln 99, ln 99] ~ [-4.595, 4.595].
    """
    s = clf.scores(P)
    value = float(np.log(s / (1.0 - s)).mean())
    kind = Metric.KL_RATIO_XY if clf.uses_labels else Metric.KL_RATIO_X
    return DivergenceEstimate(kind=kind, value=value, n_p=clf.n_p, n_q=clf.n_q, seed=clf.seed)


@dataclass(frozen=True)
class GroupSummary:
    """Normative description of a source: group mix and outcome rates."""

    group_proportions: dict[str, float]
    group_outcome_rates: dict[str, float]
    overall_outcome_rate: float
    group_sizes: dict[str, int]

    @property
    def n(self) -> int:
        return sum(self.group_sizes.values())

    def vocabulary(self) -> tuple[str, ...]:
        return tuple(sorted(self.group_proportions))


def group_summary(source: Source) -> GroupSummary:
    if source.n_rows == 0:
        raise EmptySource("group summary needs at least one row")
    proportions: dict[str, float] = {}
    rates: dict[str, float] = {}
    sizes: dict[str, int] = {}
    for gid in sorted(np.unique(source.groups)):
        mask = source.groups == gid
        sizes[gid] = int(mask.sum())
        proportions[gid] = sizes[gid] / source.n_rows
        rates[gid] = float(source.labels[mask].mean())
    return GroupSummary(
        group_proportions=proportions,
        group_outcome_rates=rates,
        overall_outcome_rate=float(source.labels.mean()),
        group_sizes=sizes,
    )


def normative_distance(
    a: GroupSummary, b: GroupSummary, facet: Facet = Facet.BOTH
) -> DivergenceEstimate:
    """Euclidean distance between two group summaries on the chosen facet."""
    vocab = a.vocabulary()
    if vocab != b.vocabulary():
        raise GroupVocabularyMismatch(
            f"group vocabularies differ: {vocab} vs {b.vocabulary()}"
        )

    def vector(summary):
        parts = []
        if facet in (Facet.PROPORTIONS, Facet.BOTH):
            parts += [summary.group_proportions[g] for g in vocab]
        if facet in (Facet.OUTCOME_RATES, Facet.BOTH):
            parts += [summary.group_outcome_rates[g] for g in vocab]
        return np.asarray(parts)

    value = float(np.linalg.norm(vector(a) - vector(b)))
    return DivergenceEstimate(kind=Metric.NORMATIVE, value=value, n_p=a.n, n_q=b.n, seed=0)


def _kde_log_density(
    points: np.ndarray, sample: np.ndarray, bandwidth: np.ndarray
) -> np.ndarray:
    """Log of a product-Gaussian KDE with diagonal bandwidth, chunked.

    Kernel contributions at exactly zero distance are excluded (the
    leave-one-out rule, applied symmetrically): scoring a sample under its
    own density estimate would otherwise be biased upward by the point's
    own kernel mass.
    """
    n, d = sample.shape
    log_norm = -0.5 * d * math.log(2.0 * math.pi) - float(np.log(bandwidth).sum())
    self_kernel = math.exp(log_norm)
    out = np.empty(points.shape[0])
    chunk = max(1, int(2_000_000 // max(n, 1)))
    for start in range(0, points.shape[0], chunk):
        block = points[start : start + chunk]
        diff = (block[:, None, :] - sample[None, :, :]) / bandwidth
        sq_dist = (diff * diff).sum(axis=2)
        kernels = np.exp(log_norm - 0.5 * sq_dist)
        matches = (sq_dist == 0.0).sum(axis=1)
        remaining = np.maximum(n - matches, 1)
        total = np.maximum(kernels.sum(axis=1) - matches * self_kernel, 0.0) / remaining
        total[matches >= n] = 0.0
        out[start : start + chunk] = total
    return np.log(np.maximum(out, DENSITY_FLOOR))


def kde_pca_kl(
    P: Source, Q: Source, n_components: int = 3, seed: int = 0
) -> DivergenceEstimate:
    """KL(P || Q) via Gaussian KDE on whitened PCA projections.

    PCA is fit on pooled standardized features; each distribution gets its
    own Scott's-rule bandwidth per projected dimension; densities are
    floored at 1e-12 and zero-distance kernel contributions are excluded
    on both sides (so a sample never scores its own kernel mass, and
    literally identical samples give exactly 0). When the pooled data has
    rank below ``n_components`` a DegenerateCovariance warning is emitted
    and the projection falls back to the actual rank.
    """
    if P.feature_names != Q.feature_names:
        raise SchemaMismatch(f"{P.id!r} and {Q.id!r} have different feature names")
    if P.n_rows < 2 or Q.n_rows < 2:
        raise EmptySource("KDE needs at least two rows per side")
    pooled = np.vstack([P.features, Q.features])
    if pooled.shape[0] < 10 * n_components:
        raise NotEnoughRows(
            f"KDE with {n_components} components needs >= {10 * n_components} pooled rows"
        )
    scaler = fit_scaler(pooled)
    pooled_scaled = apply_scaler(scaler, pooled)
    centered = pooled_scaled - pooled_scaled.mean(axis=0)
    _, singular, vt = np.linalg.svd(centered, full_matrices=False)
    rank = int((singular > singular[0] * 1e-10).sum()) if singular.size else 0
    if rank < n_components:
        warnings.warn(
            f"pooled rank {rank} < n_components {n_components}; reducing",
            DegenerateCovariance,
            stacklevel=2,
        )
        n_components = max(rank, 1)
    components = vt[:n_components]
    scale = singular[:n_components] / math.sqrt(pooled.shape[0] - 1)
    scale = np.where(scale == 0.0, 1.0, scale)

    def project(source):
        scaled = apply_scaler(scaler, source.features) - pooled_scaled.mean(axis=0)
        return (scaled @ components.T) / scale

    zp = project(P)
    zq = project(Q)

    def bandwidth(z):
        sd = z.std(axis=0, ddof=1)
        sd = np.where(sd < 1e-6, 1e-6, sd)
        return sd * z.shape[0] ** (-1.0 / (n_components + 4))

    log_p = _kde_log_density(zp, zp, bandwidth(zp))
    log_q = _kde_log_density(zp, zq, bandwidth(zq))
    value = float((log_p - log_q).mean())
    return DivergenceEstimate(
        kind=Metric.KDE_PCA_KL, value=value, n_p=P.n_rows, n_q=Q.n_rows, seed=seed
    )


def exact_kl(p, q) -> float:
    """Sum of p_i * ln(p_i / q_i) with the 0 * ln 0 = 0 convention."""
    pv = np.asarray(p, dtype=float)
    qv = np.asarray(q, dtype=float)
    if pv.shape != qv.shape or pv.ndim != 1:
        raise ValueError("p and q must be 1-D pmfs of equal length")
    if (pv < 0).any() or (qv < 0).any():
        raise ValueError("pmf entries must be >= 0")
    if abs(pv.sum() - 1.0) > 1e-9 or abs(qv.sum() - 1.0) > 1e-9:
        raise ValueError("pmfs must sum to 1")
    support = pv > 0
    if (qv[support] == 0).any():
        raise AbsoluteContinuityViolation("p has mass where q is zero")
    return float((pv[support] * np.log(pv[support] / qv[support])).sum())


def estimate_divergence(
    P: Source,
    Q: Source,
    metric: Metric,
    seed: int,
    facet: Facet = Facet.BOTH,
    n_components: int = 3,
) -> DivergenceEstimate:
    """Dispatch to the named heuristic with P as the candidate side."""
    metric = Metric(metric)
    if metric in CLASSIFIER_METRICS:
        clf = fit_domain_classifier(P, Q, uses_labels=metric in XY_METRICS, seed=seed)
        if metric in (Metric.SCORE_X, Metric.SCORE_XY):
            return score_distance(clf, P)
        return kl_ratio(clf, P)
    if metric is Metric.NORMATIVE:
        return normative_distance(group_summary(P), group_summary(Q), facet=facet)
    if metric is Metric.KDE_PCA_KL:
        return kde_pca_kl(P, Q, n_components=n_components, seed=seed)
    raise ValueError(f"{metric} cannot be estimated from samples")


def excess_kl(
    d_big: Source,
    d_small: Source,
    d_ref: Source,
    estimator: Metric = Metric.KL_RATIO_X,
    seed: int = 0,
) -> float:
    """KL(big || ref) - KL(small || ref) under a shared seed schedule.

    A positive value signals that the enlargement moved the training set
    away from the reference, i.e. the addition should be rejected.
    """
    estimator = Metric(estimator)
    if estimator not in (Metric.KL_RATIO_X, Metric.KL_RATIO_XY, Metric.KDE_PCA_KL):
        raise ValueError("excess KL needs a KL-style estimator")
    big = estimate_divergence(d_big, d_ref, estimator, seed=derive_seed(seed, "excess", "big"))
    small = estimate_divergence(
        d_small, d_ref, estimator, seed=derive_seed(seed, "excess", "small")
    )
    return big.value - small.value


def distance_matrix(
    sources: list[Source],
    metric: Metric,
    seed: int,
    facet: Facet = Facet.BOTH,
) -> tuple[list[str], np.ndarray, list[DivergenceEstimate]]:
    """All pairwise estimates; rows index P, columns index Q."""
    ids = [s.id for s in sources]
    m = len(sources)
    values = np.zeros((m, m))
    records = []
    for i, p in enumerate(sources):
        for j, q in enumerate(sources):
            est = estimate_divergence(
                p, q, metric, seed=derive_seed(seed, "pairwise", p.id, q.id), facet=facet
            )
            values[i, j] = est.value
            records.append(est)
    return ids, values, records
