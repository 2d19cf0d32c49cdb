"""Sequential and mixture training-set construction.

Sequential accumulation exhausts sources in a fixed order and takes a
seeded uniform subsample of the partially used last source; the training
set at size n is therefore a strict row-superset of the set at any
smaller n along the same plan. Mixture accumulation samples all sources
at fixed proportions (largest-remainder rounding, without replacement
within each source). Either way the realized composition is returned as
weights alpha_i = contributed_i / n.

For discrete scenarios with exactly known pmfs, the checker below
evaluates, in closed form, a sufficient condition under which consuming
the last source is guaranteed to increase train/test divergence: with
c the (non-negative, by joint convexity) gap between the mixture
divergence and the weighted source divergences,

    delta(S_k, test) - c * n / n_k >= delta(train_n, test)
        implies  delta(train_n, test) >= delta(train_{n - n_k}, test)

where n_k is the number of rows actually consumed from the last source.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from enum import Enum

import numpy as np

from .configfile import parse_floats, parse_ints, parse_strings, require
from .dataset import Source, concat
from .divergence import DivergenceEstimate, Facet, Metric, estimate_divergence, exact_kl
from .errors import InvalidScenario, PlanExceedsData, UnknownSourceId
from .seeding import derive_seed
from .synth import DiscreteScenario


class Mode(str, Enum):
    SEQUENTIAL = "sequential"
    MIXTURE = "mixture"


@dataclass(frozen=True)
class AccumulationPlan:
    """How a training set of size ``target_n`` is assembled from sources.

    ``order`` lists source ids; Sequential consumes them in that order,
    Mixture samples them at ``weights`` (aligned with ``order``).
    """

    mode: Mode
    order: tuple[str, ...]
    target_n: int
    seed: int
    weights: tuple[float, ...] | None = None

    def __post_init__(self):
        object.__setattr__(self, "mode", Mode(self.mode))
        object.__setattr__(self, "order", tuple(self.order))
        if not self.order:
            raise ValueError("plan needs a non-empty source order")
        if self.target_n < 0:
            raise ValueError("target_n must be >= 0")
        if self.mode is Mode.MIXTURE:
            if self.weights is None or len(self.weights) != len(self.order):
                raise ValueError("mixture plans need one weight per source")
            w = tuple(float(v) for v in self.weights)
            if any(v < 0 for v in w) or abs(sum(w) - 1.0) > 1e-9:
                raise ValueError("mixture weights must be >= 0 and sum to 1")
            object.__setattr__(self, "weights", w)


def _consumption_order(source: Source, plan_seed: int) -> np.ndarray:
    """Fixed per-(plan, source) row permutation; prefixes nest across n."""
    rng = np.random.default_rng(derive_seed(plan_seed, "consume", source.id))
    return rng.permutation(source.n_rows)


def _largest_remainder(weights: tuple[float, ...], total: int) -> list[int]:
    raw = np.asarray(weights) * total
    counts = np.floor(raw).astype(int)
    shortfall = total - int(counts.sum())
    if shortfall > 0:
        remainders = raw - counts
        # ties break toward the earlier source for determinism
        order = sorted(range(len(weights)), key=lambda i: (-remainders[i], i))
        for i in order[:shortfall]:
            counts[i] += 1
    return [int(c) for c in counts]


def build_training_set(
    sources: list[Source], plan: AccumulationPlan
) -> tuple[Source, np.ndarray]:
    """Assemble the training set and return it with realized weights alpha.

    alpha is aligned with ``plan.order`` and sums to 1 (sources the plan
    never reaches contribute 0).
    """
    by_id = {s.id: s for s in sources}
    ordered = []
    for sid in plan.order:
        if sid not in by_id:
            raise UnknownSourceId(f"plan references unknown source {sid!r}")
        ordered.append(by_id[sid])

    if plan.mode is Mode.SEQUENTIAL:
        available = sum(s.n_rows for s in ordered)
        if plan.target_n > available:
            raise PlanExceedsData(
                f"target_n={plan.target_n} exceeds {available} available rows"
            )
        counts = []
        remaining = plan.target_n
        for source in ordered:
            take = min(source.n_rows, remaining)
            counts.append(take)
            remaining -= take
    else:
        counts = _largest_remainder(plan.weights, plan.target_n)
        for source, count in zip(ordered, counts):
            if count > source.n_rows:
                raise PlanExceedsData(
                    f"mixture asks {count} rows of {source.id!r} which has {source.n_rows}"
                )

    parts = []
    for source, count in zip(ordered, counts):
        if count == source.n_rows:
            parts.append(source)
        elif count > 0:
            perm = _consumption_order(source, plan.seed)
            parts.append(source.take(np.sort(perm[:count]), suffix=":part"))
    if parts:
        built = concat(parts) if len(parts) > 1 else parts[0]
    else:
        built = ordered[0].take(np.zeros(0, dtype=int), suffix=":empty")
    alpha = (
        np.asarray(counts, dtype=float) / plan.target_n
        if plan.target_n > 0
        else np.zeros(len(counts))
    )
    return built, alpha


def divergence_trajectory(
    sources: list[Source],
    plan: AccumulationPlan,
    test: Source,
    metric: Metric,
    grid: list[int],
    facet: Facet = Facet.BOTH,
) -> list[tuple[int, DivergenceEstimate]]:
    """Estimate divergence(train_n, test) along an increasing grid of n."""
    if list(grid) != sorted(grid) or len(set(grid)) != len(grid):
        raise ValueError("grid must be strictly increasing")
    out = []
    for n in grid:
        train, _ = build_training_set(sources, replace(plan, target_n=int(n)))
        est = estimate_divergence(
            train, test, metric, seed=derive_seed(plan.seed, "traj", n), facet=facet
        )
        out.append((int(n), est))
    return out


@dataclass(frozen=True)
class LemmaCheckResult:
    """Both sides of the divergence-growth condition on exact pmfs."""

    n: int
    k: int
    delta_train_n: float
    delta_train_prev: float
    delta_source_k: float
    c: float
    condition_holds: bool
    divergence_increased: bool


def _mixture_pmf(pmfs, alphas) -> np.ndarray:
    out = np.zeros(len(pmfs[0]))
    for pmf, alpha in zip(pmfs, alphas):
        out += alpha * np.asarray(pmf, dtype=float)
    return out


def check_lemma_condition(
    scenario: DiscreteScenario, order: list[int], n: int
) -> LemmaCheckResult:
    """Evaluate the sufficient condition and the actual outcome exactly.

    ``order`` indexes into the scenario's sources; ``n`` must land inside
    the second or a later source so there is a previous training set to
    compare against. The partially used last source is treated at its
    consumed size (rows the training set actually contains).
    """
    scenario.validate()
    sizes = [scenario.sizes[i] for i in order]
    pmfs = [scenario.source_pmfs[i] for i in order]
    cumulative = np.cumsum(sizes)
    if n <= sizes[0]:
        raise InvalidScenario("n must span at least two sources")
    if n > cumulative[-1]:
        raise PlanExceedsData(f"n={n} exceeds {cumulative[-1]} available rows")
    k = int(np.searchsorted(cumulative, n, side="left")) + 1  # count of touched sources
    consumed_last = n - int(cumulative[k - 2])
    alphas = [sizes[i] / n for i in range(k - 1)] + [consumed_last / n]

    test = np.asarray(scenario.test_pmf, dtype=float)
    train_pmf = _mixture_pmf(pmfs[:k], alphas)
    delta_train_n = exact_kl(train_pmf, test)

    n_prev = int(cumulative[k - 2])
    prev_alphas = [sizes[i] / n_prev for i in range(k - 1)]
    delta_train_prev = exact_kl(_mixture_pmf(pmfs[: k - 1], prev_alphas), test)

    delta_source_k = exact_kl(np.asarray(pmfs[k - 1], dtype=float), test)
    source_deltas = [exact_kl(np.asarray(pmfs[i], dtype=float), test) for i in range(k)]
    c = float(np.dot(alphas, source_deltas) - delta_train_n)

    condition_holds = delta_source_k - c * n / consumed_last >= delta_train_n
    # 1e-12 slack absorbs float roundoff in the exact-arithmetic comparison
    divergence_increased = delta_train_n >= delta_train_prev - 1e-12
    return LemmaCheckResult(
        n=int(n),
        k=k,
        delta_train_n=delta_train_n,
        delta_train_prev=delta_train_prev,
        delta_source_k=delta_source_k,
        c=c,
        condition_holds=bool(condition_holds),
        divergence_increased=bool(divergence_increased),
    )


def example1_linear_composition(delta_s1: float, delta_s2: float, n1: int, n: int) -> float:
    """Two-source train/test divergence if divergence composed linearly."""
    if n < 1:
        raise ValueError("n must be >= 1")
    if n <= n1:
        return float(delta_s1)
    frac = n1 / n
    return float(frac * delta_s1 + (1.0 - frac) * delta_s2)


def plan_from_config(cfg: dict[str, str], default_seed: int) -> dict:
    """Parse a plan config into the plan plus simulation settings.

    Recognized keys: mode, order, weights, target_n, grid, metric,
    n_seeds, test, seed.
    """
    mode = Mode(cfg.get("mode", "sequential").strip().lower())
    order = tuple(parse_strings(require(cfg, "order", "plan")))
    weights = tuple(parse_floats(cfg["weights"])) if "weights" in cfg else None
    grid = parse_ints(cfg["grid"]) if "grid" in cfg else None
    target_n = int(cfg["target_n"]) if "target_n" in cfg else (max(grid) if grid else 0)
    seed = int(cfg.get("seed", str(default_seed)))
    plan = AccumulationPlan(mode=mode, order=order, target_n=target_n, seed=seed, weights=weights)
    return {
        "plan": plan,
        "grid": grid,
        "metric": Metric(cfg.get("metric", "kl_ratio_x")),
        "n_seeds": int(cfg.get("n_seeds", "5")),
        "test": cfg.get("test"),
    }
