"""Synthetic multi-source scenario generators with controllable shift.

These stand in for restricted multi-site clinical data: a family of
Gaussian sources with graded covariate shift and label noise, discrete
scenarios with exactly known pmfs (so divergences can be computed in
closed form), and a small sine-based two-source toy where adding the
second source is guaranteed to hurt.

Labels come from one shared logistic ground truth across sources, so
covariate shift (``mean_shifts``) and concept shift (``label_flip_rate``)
are independently controllable.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.stats import norm

from .configfile import parse_floats, parse_ints, parse_vectors, require
from .dataset import Source
from .errors import InvalidScenario
from .models import sigmoid
from .seeding import derive_seed

SINE_POLY_DEGREE = 5
DEFAULT_TEST_SIZE = 400


@dataclass(frozen=True)
class GaussianScenario:
    """A family of Gaussian sources sharing one logistic label rule.

    ``mean_shifts`` holds one entry per source: either a scalar (applied
    to every feature) or a length-``d`` vector of per-feature shifts, in
    units of the base feature std. ``group_quantiles`` partitions feature
    1 into ``len+1`` groups at quantiles of the unshifted unit-variance
    base marginal, so group composition responds to shift only when
    feature 1 itself shifts.
    """

    d: int
    n_sources: int
    mean_shifts: tuple
    cov_scale: tuple[float, ...]
    label_weights: tuple[float, ...]
    label_intercept: float
    label_flip_rate: tuple[float, ...]
    group_quantiles: tuple[float, ...]
    sizes: tuple[int, ...]
    seed: int

    def validate(self) -> None:
        if self.d < 1 or self.n_sources < 1:
            raise InvalidScenario("need d >= 1 and n_sources >= 1")
        if len(self.sizes) != self.n_sources or any(s < 0 for s in self.sizes):
            raise InvalidScenario("sizes must be one non-negative count per source")
        if len(self.cov_scale) != self.n_sources or any(c <= 0 for c in self.cov_scale):
            raise InvalidScenario("cov_scale must be one positive real per source")
        if len(self.label_flip_rate) != self.n_sources or any(
            not 0.0 <= r <= 1.0 for r in self.label_flip_rate
        ):
            raise InvalidScenario("label_flip_rate entries must lie in [0, 1]")
        if len(self.label_weights) != self.d:
            raise InvalidScenario("label_weights must have one entry per feature")
        if len(self.mean_shifts) != self.n_sources:
            raise InvalidScenario("mean_shifts must have one entry per source")
        for shift in self.mean_shifts:
            if np.ndim(shift) not in (0, 1):
                raise InvalidScenario("each mean shift is a scalar or a length-d vector")
            if np.ndim(shift) == 1 and len(shift) != self.d:
                raise InvalidScenario("vector mean shifts must have length d")
        qs = self.group_quantiles
        if any(not 0.0 < q < 1.0 for q in qs) or list(qs) != sorted(set(qs)):
            raise InvalidScenario("group_quantiles must be strictly increasing in (0, 1)")

    def shift_vector(self, i: int) -> np.ndarray:
        shift = self.mean_shifts[i]
        if np.ndim(shift) == 0:
            return np.full(self.d, float(shift))
        return np.asarray(shift, dtype=float)


@dataclass(frozen=True)
class DiscreteScenario:
    """Finite-support sources with exactly known pmfs.

    The pmfs stay on the scenario so divergences between any mixtures of
    the sources and the test distribution can be computed in closed form;
    generated samples are one-hot encodings for estimator validation.
    """

    support_size: int
    source_pmfs: tuple[tuple[float, ...], ...]
    test_pmf: tuple[float, ...]
    sizes: tuple[int, ...]

    def validate(self) -> None:
        k = self.support_size
        if k < 2:
            raise InvalidScenario("support_size must be >= 2")
        if len(self.sizes) != len(self.source_pmfs) or any(s < 0 for s in self.sizes):
            raise InvalidScenario("sizes must be one non-negative count per source")
        for pmf in list(self.source_pmfs) + [self.test_pmf]:
            if len(pmf) != k:
                raise InvalidScenario(f"each pmf needs {k} entries")
            if any(p < 0 for p in pmf):
                raise InvalidScenario("pmf entries must be >= 0")
            if abs(sum(pmf) - 1.0) > 1e-12:
                raise InvalidScenario(f"pmf sums to {sum(pmf)!r}, not 1")


def _assign_groups(feature_one: np.ndarray, quantiles: tuple[float, ...]) -> np.ndarray:
    if not quantiles:
        return np.full(feature_one.shape[0], "g0", dtype="<U8")
    cuts = norm.ppf(np.asarray(quantiles))
    idx = np.searchsorted(cuts, feature_one)
    return np.asarray([f"g{j}" for j in idx], dtype=str)


def generate_gaussian_sources(scenario: GaussianScenario) -> list[Source]:
    """Sample every source in the scenario, deterministic given its seed."""
    scenario.validate()
    w = np.asarray(scenario.label_weights, dtype=float)
    names = tuple(f"x{j + 1}" for j in range(scenario.d))
    sources = []
    for i in range(scenario.n_sources):
        rng = np.random.default_rng(derive_seed(scenario.seed, "gauss", i))
        n = scenario.sizes[i]
        X = scenario.shift_vector(i) + math.sqrt(scenario.cov_scale[i]) * rng.standard_normal(
            (n, scenario.d)
        )
        p = sigmoid(X @ w + scenario.label_intercept)
        y = (rng.uniform(size=n) < p).astype(int)
        flips = rng.uniform(size=n) < scenario.label_flip_rate[i]
        y = np.where(flips, 1 - y, y)
        groups = _assign_groups(X[:, 0], scenario.group_quantiles)
        sources.append(
            Source(id=f"s{i:02d}", features=X, labels=y, groups=groups, feature_names=names)
        )
    return sources


def _sine_source(
    source_id: str, n: int, sign: float, noise_sd: float, seed: int
) -> Source:
    rng = np.random.default_rng(seed)
    x = rng.uniform(0.0, math.pi, size=n)
    y_reg = sign * np.sin(x) + rng.normal(0.0, noise_sd, size=n)
    labels = (y_reg > 0).astype(int)
    features = np.column_stack([x**k for k in range(1, SINE_POLY_DEGREE + 1)])
    names = tuple(f"x_pow_{k}" for k in range(1, SINE_POLY_DEGREE + 1))
    groups = np.full(n, "all", dtype=str)
    return Source(id=source_id, features=features, labels=labels, groups=groups, feature_names=names)


def generate_sine_toy(
    n_A: int,
    n_B: int,
    noise_sd: float,
    seed: int,
    test_size: int = DEFAULT_TEST_SIZE,
) -> tuple[list[Source], Source]:
    """Two-source toy: A follows sin(x), B follows -sin(x), test follows A.

    Regression targets are thresholded at 0 to binary labels over
    x ~ Uniform[0, pi], so A and B carry complementary labels wherever
    |sin x| dominates the noise. Features are a fixed degree-5 polynomial
    expansion of x so the shared linear model stack applies directly.
    """
    if n_A < 0 or n_B < 0 or test_size < 0:
        raise InvalidScenario("counts must be >= 0")
    a = _sine_source("A", n_A, +1.0, noise_sd, derive_seed(seed, "sine", "A"))
    b = _sine_source("B", n_B, -1.0, noise_sd, derive_seed(seed, "sine", "B"))
    test = _sine_source("test", test_size, +1.0, noise_sd, derive_seed(seed, "sine", "test"))
    return [a, b], test


def generate_discrete_sources(
    scenario: DiscreteScenario, seed: int, test_size: int = 1000
) -> tuple[list[Source], Source]:
    """Sample one-hot sources plus a test sample from the test pmf.

    Labels are the atom-index parity (a fixed deterministic rule) and all
    rows share one group; the exact pmfs stay on the scenario for analytic
    work.
    """
    scenario.validate()
    k = scenario.support_size
    names = tuple(f"a{j}" for j in range(k))

    def sample(pmf, n, source_id, tag):
        rng = np.random.default_rng(derive_seed(seed, "discrete", tag))
        atoms = rng.choice(k, size=n, p=np.asarray(pmf, dtype=float))
        features = np.zeros((n, k))
        features[np.arange(n), atoms] = 1.0
        labels = atoms % 2
        groups = np.full(n, "all", dtype=str)
        return Source(id=source_id, features=features, labels=labels, groups=groups, feature_names=names)

    sources = [
        sample(pmf, scenario.sizes[i], f"d{i}", f"src{i}")
        for i, pmf in enumerate(scenario.source_pmfs)
    ]
    test = sample(scenario.test_pmf, test_size, "test", "test")
    return sources, test


def graded_shift_scenario(
    seed: int,
    n_sources: int = 12,
    d: int = 20,
    size: int = 2000,
    max_shift: float = 2.0,
    max_flip: float = 0.6,
) -> GaussianScenario:
    """The calibrated multi-site suite used throughout the studies.

    Source i carries a covariate mean shift of magnitude ``max_shift * i /
    (n_sources - 1)`` and a label flip rate graded quadratically up to
    ``max_flip``, so distance to source 0 and damage when training on a
    source both grow with i (the nearest sources are almost clean, the
    furthest actively mislead). The shift pattern lives on +/- pairs of
    equally weighted features, so label rates stay at 0.5 under any shift,
    and it leaves feature 1 (the grouping feature) alone, so group
    composition stays flat up to sampling noise. Normative summary
    distances therefore carry no shift signal by construction.
    """
    if d < 4 or d % 2 != 0:
        raise InvalidScenario("graded_shift_scenario needs an even d >= 4")
    # feature 1 drives groups but carries no label weight and never
    # shifts, so neither group mix nor group outcome rates respond to the
    # damage grade; the remaining features form (+, -) pairs of equal
    # label weight that shift in opposite directions, plus one unshifted
    # tail feature
    weights = [0.0]
    pattern = [0.0]
    for pair in range((d - 2) // 2):
        w = 0.9 * 0.85**pair
        weights += [w, w]
        pattern += [1.0, -1.0]
    weights.append(0.3)
    pattern.append(0.0)
    pattern_vec = np.asarray(pattern) / np.linalg.norm(pattern)
    grades = np.linspace(0.0, 1.0, n_sources)
    shifts = tuple(tuple(max_shift * g * pattern_vec) for g in grades)
    flips = tuple(float(max_flip * g * g) for g in grades)
    return GaussianScenario(
        d=d,
        n_sources=n_sources,
        mean_shifts=shifts,
        cov_scale=tuple(1.0 for _ in range(n_sources)),
        label_weights=tuple(weights),
        label_intercept=0.0,
        label_flip_rate=flips,
        group_quantiles=(0.35, 0.7),
        sizes=tuple(size for _ in range(n_sources)),
        seed=seed,
    )


def scenario_from_config(cfg: dict[str, str], seed_override: int | None = None):
    """Build a scenario object from flat key-value pairs.

    Returns ``("gaussian", GaussianScenario)``, ``("discrete",
    DiscreteScenario, test_size)`` or ``("sine", params_dict)`` according
    to the ``kind`` key.
    """
    kind = cfg.get("kind", "").strip().lower()
    if kind == "gaussian":
        d = int(require(cfg, "d", "gaussian scenario"))
        n_sources = int(require(cfg, "n_sources", "gaussian scenario"))
        sizes = parse_ints(require(cfg, "sizes", "gaussian scenario"))
        if len(sizes) == 1:
            sizes = sizes * n_sources
        shifts_raw = parse_floats(cfg.get("mean_shifts", "0"))
        if len(shifts_raw) == 1:
            shifts_raw = shifts_raw * n_sources
        if "mean_shift_pattern" in cfg:
            pattern = np.asarray(parse_floats(cfg["mean_shift_pattern"]))
            shifts = tuple(tuple(s * pattern) for s in shifts_raw)
        else:
            shifts = tuple(shifts_raw)
        cov = parse_floats(cfg.get("cov_scale", "1"))
        if len(cov) == 1:
            cov = cov * n_sources
        flips = parse_floats(cfg.get("label_flip_rate", "0"))
        if len(flips) == 1:
            flips = flips * n_sources
        scenario = GaussianScenario(
            d=d,
            n_sources=n_sources,
            mean_shifts=shifts,
            cov_scale=tuple(cov),
            label_weights=tuple(parse_floats(require(cfg, "label_weights", "gaussian scenario"))),
            label_intercept=float(cfg.get("label_intercept", "0")),
            label_flip_rate=tuple(flips),
            group_quantiles=tuple(parse_floats(cfg.get("group_quantiles", ""))),
            sizes=tuple(sizes),
            seed=int(cfg.get("seed", "42")),
        )
        if seed_override is not None:
            scenario = replace(scenario, seed=seed_override)
        scenario.validate()
        return ("gaussian", scenario)
    if kind == "discrete":
        scenario = DiscreteScenario(
            support_size=int(require(cfg, "support_size", "discrete scenario")),
            source_pmfs=tuple(tuple(v) for v in parse_vectors(require(cfg, "source_pmfs", "discrete scenario"))),
            test_pmf=tuple(parse_floats(require(cfg, "test_pmf", "discrete scenario"))),
            sizes=tuple(parse_ints(require(cfg, "sizes", "discrete scenario"))),
        )
        scenario.validate()
        return ("discrete", scenario, int(cfg.get("test_size", "1000")))
    if kind == "sine":
        return (
            "sine",
            {
                "n_A": int(cfg.get("n_a", "10")),
                "n_B": int(cfg.get("n_b", "90")),
                "noise_sd": float(cfg.get("noise_sd", "0.1")),
                "test_size": int(cfg.get("test_size", str(DEFAULT_TEST_SIZE))),
            },
        )
    raise InvalidScenario(f"unknown scenario kind {kind!r}")


def generate_from_config(
    cfg: dict[str, str], seed: int
) -> tuple[list[Source], Source | None]:
    """Generate all sources (and a test source, when the kind defines one)."""
    parsed = scenario_from_config(cfg, seed_override=seed)
    if parsed[0] == "gaussian":
        return generate_gaussian_sources(parsed[1]), None
    if parsed[0] == "discrete":
        sources, test = generate_discrete_sources(parsed[1], seed=seed, test_size=parsed[2])
        return sources, test
    params = parsed[1]
    sources, test = generate_sine_toy(
        params["n_A"], params["n_B"], params["noise_sd"], seed, test_size=params["test_size"]
    )
    return sources, test
