"""Source-selection objectives and strategy comparison.

Two objectives frame the decision of which source to add to a reference
training set:

* the full data-addition effect: AUC(train = reference + candidate) -
  AUC(train = reference), both evaluated on the reference test split; and
* its cheap proxy, the out-of-distribution delta: AUC(train = candidate
  only) - in-distribution AUC.

Since even the proxy requires training on the candidate, candidates are
ranked instead by divergence heuristics delta(candidate, reference),
ascending (closest first). Strategy comparison evaluates adding the k
closest sources, the k furthest, and a size-matched mixture baseline
under shared seeds so differences are attributable to training
composition only.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .dataset import Source, SplitSpec, concat, subsample
from .divergence import (
    Facet,
    Metric,
    estimate_divergence,
)
from .errors import NotEnoughRows
from .evaluation import (
    ExperimentConfig,
    ExperimentResult,
    MetricKind,
    pearson,
    run_experiment,
)
from .accumulate import AccumulationPlan, Mode, build_training_set
from .seeding import derive_seed


class Strategy(str, Enum):
    REFERENCE_ONLY = "reference_only"
    BEST_K = "best_k"
    WORST_K = "worst_k"
    MIXTURE_BASELINE = "mixture_baseline"


@dataclass(frozen=True)
class RankEntry:
    source_id: str
    value: float
    rank: int


@dataclass(frozen=True)
class CandidateRanking:
    reference_id: str
    entries: tuple[RankEntry, ...]
    metric: Metric
    seed: int

    def ids_ascending(self) -> list[str]:
        return [e.source_id for e in self.entries]

    def to_dict(self) -> dict:
        return {
            "reference_id": self.reference_id,
            "metric": self.metric.value,
            "seed": self.seed,
            "entries": [
                {"source_id": e.source_id, "value": e.value, "rank": e.rank}
                for e in self.entries
            ],
        }


@dataclass(frozen=True)
class StrategyOutcome:
    strategy: Strategy
    k: int
    added_ids: tuple[str, ...]
    result: ExperimentResult


@dataclass(frozen=True)
class StudyConfig:
    """Sizes and protocol shared by addition studies and strategy runs."""

    train_size: int = 1500
    test_size: int = 400
    n_folds: int = 5
    n_repeats: int = 5
    l2: float = 1.0
    min_group_size: int = 10

    def experiment(self) -> ExperimentConfig:
        return ExperimentConfig(l2=self.l2, min_group_size=self.min_group_size)


def split_reference(
    reference: Source, test_size: int, train_size: int | None, seed: int
) -> tuple[Source, Source]:
    """Disjoint (train, test) split of the reference source."""
    needed = test_size + (train_size or 0)
    if needed > reference.n_rows:
        raise NotEnoughRows(
            f"reference {reference.id!r} has {reference.n_rows} rows, needs {needed}"
        )
    rng = np.random.default_rng(derive_seed(seed, "refsplit", reference.id))
    perm = rng.permutation(reference.n_rows)
    test = reference.take(np.sort(perm[:test_size]), suffix=":test")
    if train_size is None:
        train = reference.take(np.sort(perm[test_size:]), suffix=":train")
    else:
        train = reference.take(np.sort(perm[test_size : test_size + train_size]), suffix=":train")
    return train, test


def evaluate_addition(
    reference: Source,
    candidate: Source,
    test: Source,
    split: SplitSpec,
    config: ExperimentConfig | None = None,
) -> float:
    """AUC change from adding the candidate to the reference training set.

    Test rows must be disjoint from the reference training rows (use
    split_reference). Both arms share the split seed and test rows.
    """
    base = run_experiment(reference, test, split, config).mean[MetricKind.AUC]
    if candidate.n_rows == 0:
        return 0.0
    combined = run_experiment(concat([reference, candidate]), test, split, config)
    return combined.mean[MetricKind.AUC] - base


def ood_auc_delta(
    candidate: Source,
    reference: Source,
    test: Source,
    split: SplitSpec,
    config: ExperimentConfig | None = None,
) -> float:
    """AUC(train = candidate only) minus in-distribution AUC, on the same test."""
    ood = run_experiment(candidate, test, split, config).mean[MetricKind.AUC]
    in_dist = run_experiment(reference, test, split, config).mean[MetricKind.AUC]
    return ood - in_dist


def rank_candidates(
    reference: Source,
    candidates: list[Source],
    metric: Metric,
    seed: int,
    facet: Facet = Facet.BOTH,
) -> CandidateRanking:
    """Rank candidates ascending by delta(candidate, reference).

    The candidate is the P side of the estimate. Ties break by source id
    so the ordering is deterministic, and the ordering is invariant to any
    strictly increasing transform applied uniformly to heuristic values.
    """
    if not candidates:
        raise ValueError("need at least one candidate")
    scored = []
    for candidate in candidates:
        est = estimate_divergence(
            candidate,
            reference,
            metric,
            seed=derive_seed(seed, "rank", candidate.id),
            facet=facet,
        )
        scored.append((candidate.id, est.value))
    scored.sort(key=lambda pair: (pair[1], pair[0]))
    entries = tuple(
        RankEntry(source_id=sid, value=value, rank=i + 1)
        for i, (sid, value) in enumerate(scored)
    )
    return CandidateRanking(
        reference_id=reference.id, entries=entries, metric=Metric(metric), seed=seed
    )


def compare_strategies(
    reference: Source,
    candidates: list[Source],
    k: int,
    metric: Metric,
    config: StudyConfig | None = None,
    seed: int = 0,
) -> list[StrategyOutcome]:
    """Run ReferenceOnly, BestK, WorstK, and a size-matched mixture baseline.

    Each candidate is capped at ``train_size`` rows; the mixture baseline
    draws ``k * train_size`` rows uniformly across all candidates so its
    total training size matches BestK's. All arms share the reference
    test rows and the cross-validation seed.
    """
    config = config or StudyConfig()
    if k > len(candidates):
        raise ValueError(f"k={k} exceeds {len(candidates)} candidates")
    ref_train, ref_test = split_reference(
        reference, config.test_size, config.train_size, derive_seed(seed, "refsplit")
    )
    capped = [
        subsample(c, min(config.train_size, c.n_rows), derive_seed(seed, "cap", c.id)).with_id(c.id)
        for c in candidates
    ]
    ranking = rank_candidates(ref_train, capped, metric, seed=derive_seed(seed, "heuristic"))
    ascending = ranking.ids_ascending()
    best_ids = ascending[:k]
    worst_ids = ascending[len(ascending) - k :] if k else []
    by_id = {c.id: c for c in capped}
    split = SplitSpec(
        n_folds=config.n_folds, n_repeats=config.n_repeats, seed=derive_seed(seed, "xval")
    )

    def run_arm(strategy, added_ids, extra_rows):
        train = concat([ref_train] + extra_rows) if extra_rows else ref_train
        result = run_experiment(train, ref_test, split, config.experiment())
        return StrategyOutcome(
            strategy=strategy, k=k, added_ids=tuple(added_ids), result=result
        )

    outcomes = [run_arm(Strategy.REFERENCE_ONLY, (), [])]
    outcomes.append(run_arm(Strategy.BEST_K, best_ids, [by_id[i] for i in best_ids]))
    outcomes.append(run_arm(Strategy.WORST_K, worst_ids, [by_id[i] for i in worst_ids]))
    mixture_total = k * config.train_size
    if mixture_total > 0:
        weights = tuple(1.0 / len(capped) for _ in capped)
        plan = AccumulationPlan(
            mode=Mode.MIXTURE,
            order=tuple(c.id for c in capped),
            target_n=mixture_total,
            seed=derive_seed(seed, "mixture"),
            weights=weights,
        )
        mixture, _ = build_training_set(capped, plan)
        outcomes.append(run_arm(Strategy.MIXTURE_BASELINE, (mixture.id,), [mixture]))
    else:
        outcomes.append(run_arm(Strategy.MIXTURE_BASELINE, (), []))
    return outcomes


@dataclass(frozen=True)
class PairRecord:
    """One ordered (candidate, reference) pair in a correlation study."""

    candidate_id: str
    reference_id: str
    ood_auc_delta: float
    heuristics: dict[str, float]


@dataclass(frozen=True)
class CorrelationRow:
    label: str
    r: float
    p: float


@dataclass(frozen=True)
class CorrelationStudy:
    pairs: tuple[PairRecord, ...]
    correlations: tuple[CorrelationRow, ...]

    def row(self, label: str) -> CorrelationRow:
        for row in self.correlations:
            if row.label == label:
                return row
        raise KeyError(label)


NORMATIVE_LABELS = {
    Facet.PROPORTIONS: "normative_proportions",
    Facet.OUTCOME_RATES: "normative_outcome_rates",
    Facet.BOTH: "normative_both",
}


def correlation_study(
    sources: list[Source],
    metrics: list[Metric],
    config: StudyConfig | None = None,
    seed: int = 0,
) -> CorrelationStudy:
    """Correlate each heuristic with the OOD AUC delta over all ordered pairs.

    For every ordered pair (i, j), i != j: train on source i's training
    rows, test on source j's held-out test rows, and subtract source j's
    in-distribution AUC. Heuristics compare the training rows of i (as P)
    against the training rows of j (as Q). Normative metrics expand into
    one row per facet. Degenerate heuristics (zero variance across pairs)
    report r = nan, p = nan.
    """
    if len(sources) < 3:
        raise ValueError("correlation study needs at least 3 sources")
    config = config or StudyConfig()
    splits = {}
    in_dist = {}
    for source in sources:
        train, test = split_reference(
            source, config.test_size, config.train_size, derive_seed(seed, "split", source.id)
        )
        splits[source.id] = (train, test)
    for source in sources:
        train, test = splits[source.id]
        spec = SplitSpec(config.n_folds, config.n_repeats, derive_seed(seed, "cv", source.id))
        in_dist[source.id] = run_experiment(train, test, spec, config.experiment()).mean[
            MetricKind.AUC
        ]

    labels: list[str] = []
    for metric in metrics:
        metric = Metric(metric)
        if metric is Metric.NORMATIVE:
            labels.extend(NORMATIVE_LABELS[f] for f in Facet)
        else:
            labels.append(metric.value)

    pairs = []
    for cand in sources:
        for ref in sources:
            if cand.id == ref.id:
                continue
            cand_train, _ = splits[cand.id]
            ref_train, ref_test = splits[ref.id]
            spec = SplitSpec(config.n_folds, config.n_repeats, derive_seed(seed, "cv", ref.id))
            ood = run_experiment(cand_train, ref_test, spec, config.experiment()).mean[
                MetricKind.AUC
            ]
            values: dict[str, float] = {}
            for metric in metrics:
                metric = Metric(metric)
                pair_seed = derive_seed(seed, "heur", metric.value, cand.id, ref.id)
                if metric is Metric.NORMATIVE:
                    for facet in Facet:
                        est = estimate_divergence(
                            cand_train, ref_train, metric, pair_seed, facet=facet
                        )
                        values[NORMATIVE_LABELS[facet]] = est.value
                else:
                    est = estimate_divergence(cand_train, ref_train, metric, pair_seed)
                    values[metric.value] = est.value
            pairs.append(
                PairRecord(
                    candidate_id=cand.id,
                    reference_id=ref.id,
                    ood_auc_delta=ood - in_dist[ref.id],
                    heuristics=values,
                )
            )

    deltas = [p.ood_auc_delta for p in pairs]
    rows = []
    for label in labels:
        series = [p.heuristics[label] for p in pairs]
        try:
            r, p_value = pearson(series, deltas)
        except Exception:
            r, p_value = float("nan"), float("nan")
        rows.append(CorrelationRow(label=label, r=r, p=p_value))
    return CorrelationStudy(pairs=tuple(pairs), correlations=tuple(rows))


def ood_addition_correlation(
    sources: list[Source],
    config: StudyConfig | None = None,
    seed: int = 0,
) -> tuple[float, float, list[tuple[str, str, float, float]]]:
    """Correlation between the OOD proxy and the realized addition effect.

    Returns (r, p, pair table) where each table row is
    (candidate_id, reference_id, ood_auc_delta, addition_auc_delta).
    """
    if len(sources) < 3:
        raise ValueError("needs at least 3 sources")
    config = config or StudyConfig()
    table = []
    for ref in sources:
        ref_train, ref_test = split_reference(
            ref, config.test_size, config.train_size, derive_seed(seed, "split", ref.id)
        )
        spec = SplitSpec(config.n_folds, config.n_repeats, derive_seed(seed, "cv", ref.id))
        base = run_experiment(ref_train, ref_test, spec, config.experiment()).mean[MetricKind.AUC]
        for cand in sources:
            if cand.id == ref.id:
                continue
            cand_train, _ = split_reference(
                cand, config.test_size, config.train_size, derive_seed(seed, "split", cand.id)
            )
            ood = run_experiment(cand_train, ref_test, spec, config.experiment()).mean[
                MetricKind.AUC
            ]
            combined = run_experiment(
                concat([ref_train, cand_train]), ref_test, spec, config.experiment()
            ).mean[MetricKind.AUC]
            table.append((cand.id, ref.id, ood - base, combined - base))
    r, p = pearson([row[2] for row in table], [row[3] for row in table])
    return r, p, table
