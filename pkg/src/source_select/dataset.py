"""Data model for named sources, CSV ingestion, splitting, and concatenation.

A :class:`Source` is the unit of data accumulation: a named finite sample
with a feature matrix, binary labels, and categorical group identifiers.
Sources are immutable after construction and all operations are pure given
their seed, so values are safe to share across concurrent readers.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import (
    BadLabel,
    MalformedCsv,
    MissingColumn,
    MissingValueRejected,
    NotEnoughRows,
    SchemaMismatch,
    TooFewExamples,
)
from .seeding import derive_seed

MISSING_POLICIES = ("reject", "indicator_zero_fill")

LABEL_COLUMN = "label"
GROUP_COLUMN = "group"


@dataclass(frozen=True)
class Source:
    """A named finite sample: features, binary labels, group identifiers.

    Invariants enforced at construction: one label and one group per row,
    at least one feature column, labels in {0, 1}, and finite feature
    values (missingness is resolved at load time).
    """

    id: str
    features: np.ndarray
    labels: np.ndarray
    groups: np.ndarray
    feature_names: tuple[str, ...]

    def __post_init__(self):
        features = np.asarray(self.features, dtype=float)
        if features.ndim != 2:
            raise ValueError("features must be a 2-D matrix")
        raw_labels = np.asarray(self.labels)
        groups = np.asarray(self.groups, dtype=str)
        names = tuple(str(n) for n in self.feature_names)
        if features.shape[1] != len(names) or features.shape[1] < 1:
            raise ValueError("feature_names must name every feature column (d >= 1)")
        if raw_labels.shape != (features.shape[0],) or groups.shape != (features.shape[0],):
            raise ValueError("labels and groups must have one entry per feature row")
        if raw_labels.size and not np.isin(raw_labels, (0, 1)).all():
            raise BadLabel(f"source {self.id!r}: labels must be 0 or 1")
        labels = raw_labels.astype(int) if raw_labels.size else np.zeros(0, dtype=int)
        if features.size and not np.isfinite(features).all():
            raise ValueError(f"source {self.id!r}: features must be finite")
        features.setflags(write=False)
        labels.setflags(write=False)
        groups.setflags(write=False)
        object.__setattr__(self, "features", features)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "groups", groups)
        object.__setattr__(self, "feature_names", names)

    @property
    def n_rows(self) -> int:
        return self.features.shape[0]

    @property
    def d(self) -> int:
        return self.features.shape[1]

    def take(self, indices, suffix: str = "") -> "Source":
        """Row-select into a new source; ``suffix`` is appended to the id."""
        idx = np.asarray(indices, dtype=int)
        return Source(
            id=self.id + suffix,
            features=self.features[idx],
            labels=self.labels[idx],
            groups=self.groups[idx],
            feature_names=self.feature_names,
        )

    def with_id(self, new_id: str) -> "Source":
        """The same rows under a different name."""
        return Source(
            id=new_id,
            features=self.features,
            labels=self.labels,
            groups=self.groups,
            feature_names=self.feature_names,
        )


@dataclass(frozen=True)
class SchemaConfig:
    """Column roles for CSV ingestion.

    ``feature_columns`` may be an explicit list or the sentinel
    ``"all-remaining"`` (every column that is not the label or group).
    """

    label_column: str = LABEL_COLUMN
    group_column: str = GROUP_COLUMN
    feature_columns: tuple[str, ...] | str = "all-remaining"
    missing_policy: str = "indicator_zero_fill"

    def __post_init__(self):
        if self.missing_policy not in MISSING_POLICIES:
            raise ValueError(f"missing_policy must be one of {MISSING_POLICIES}")
        if isinstance(self.feature_columns, str):
            if self.feature_columns != "all-remaining":
                raise ValueError("feature_columns must be a list or 'all-remaining'")
        else:
            cols = tuple(self.feature_columns)
            if self.label_column in cols or self.group_column in cols:
                raise ValueError("label/group columns cannot also be feature columns")
            object.__setattr__(self, "feature_columns", cols)


@dataclass(frozen=True)
class SplitSpec:
    """Cross-validation layout: label-stratified folds, repeated."""

    n_folds: int = 5
    n_repeats: int = 5
    seed: int = 0

    def __post_init__(self):
        if self.n_folds < 2:
            raise ValueError("n_folds must be >= 2")
        if self.n_repeats < 1:
            raise ValueError("n_repeats must be >= 1")


def schema_from_config(cfg: dict[str, str]) -> SchemaConfig:
    """Build a SchemaConfig from flat key-value pairs (exact keys)."""
    kwargs: dict = {}
    if "label_column" in cfg:
        kwargs["label_column"] = cfg["label_column"]
    if "group_column" in cfg:
        kwargs["group_column"] = cfg["group_column"]
    if "feature_columns" in cfg:
        raw = cfg["feature_columns"]
        if raw.strip() == "all-remaining":
            kwargs["feature_columns"] = "all-remaining"
        else:
            kwargs["feature_columns"] = tuple(p.strip() for p in raw.split(",") if p.strip())
    if "missing_policy" in cfg:
        kwargs["missing_policy"] = cfg["missing_policy"]
    return SchemaConfig(**kwargs)


def _parse_label(cell: str, path, row_no: int) -> int:
    try:
        value = float(cell)
    except ValueError:
        raise BadLabel(f"{path}:{row_no}: label {cell!r} is not a number") from None
    if value not in (0.0, 1.0):
        raise BadLabel(f"{path}:{row_no}: label {cell!r} is not 0 or 1")
    return int(value)


def load_csv(path, schema: SchemaConfig | None = None) -> Source:
    """Read an RFC-4180-style CSV (UTF-8, header row) into a Source.

    Empty cells are missing values. Under ``indicator_zero_fill`` each
    feature column with at least one missing cell gains a companion 0/1
    ``<name>_missing`` column and the missing cells become 0; under
    ``reject`` any missing feature cell raises. Label and group cells
    must always be present.
    """
    schema = schema or SchemaConfig()
    path = Path(path)
    with open(path, newline="", encoding="utf-8") as handle:
        reader = csv.reader(handle)
        header = next(reader, None)
        if header is None:
            raise MalformedCsv(f"{path}: empty file (no header row)")
        rows = list(reader)

    for column in (schema.label_column, schema.group_column):
        if column not in header:
            raise MissingColumn(f"{path}: column {column!r} not in header")
    if schema.feature_columns == "all-remaining":
        feature_cols = [c for c in header if c not in (schema.label_column, schema.group_column)]
    else:
        feature_cols = list(schema.feature_columns)
        for column in feature_cols:
            if column not in header:
                raise MissingColumn(f"{path}: column {column!r} not in header")
    if not feature_cols:
        raise MissingColumn(f"{path}: no feature columns remain")

    col_index = {name: header.index(name) for name in header}
    label_i = col_index[schema.label_column]
    group_i = col_index[schema.group_column]
    feat_i = [col_index[c] for c in feature_cols]

    n, d = len(rows), len(feature_cols)
    features = np.zeros((n, d))
    missing = np.zeros((n, d), dtype=bool)
    labels = np.zeros(n, dtype=int)
    groups = []
    for r, row in enumerate(rows):
        row_no = r + 2  # 1-based, after the header
        if len(row) != len(header):
            raise MalformedCsv(
                f"{path}:{row_no}: expected {len(header)} cells, got {len(row)}"
            )
        if row[label_i] == "":
            raise BadLabel(f"{path}:{row_no}: missing label")
        labels[r] = _parse_label(row[label_i], path, row_no)
        if row[group_i] == "":
            raise MissingValueRejected(f"{path}:{row_no}: missing group identifier")
        groups.append(row[group_i])
        for j, ci in enumerate(feat_i):
            cell = row[ci]
            if cell == "":
                if schema.missing_policy == "reject":
                    raise MissingValueRejected(
                        f"{path}:{row_no}: missing value in column {feature_cols[j]!r}"
                    )
                missing[r, j] = True
            else:
                try:
                    features[r, j] = float(cell)
                except ValueError:
                    raise MalformedCsv(
                        f"{path}:{row_no}: non-numeric value {cell!r} "
                        f"in column {feature_cols[j]!r}"
                    ) from None

    names = list(feature_cols)
    had_missing = missing.any(axis=0)
    if had_missing.any():
        indicators = missing[:, had_missing].astype(float)
        features = np.hstack([features, indicators])
        names += [f"{feature_cols[j]}_missing" for j in np.flatnonzero(had_missing)]

    return Source(
        id=path.stem,
        features=features,
        labels=labels,
        groups=np.asarray(groups, dtype=str),
        feature_names=tuple(names),
    )


def write_csv(source: Source, path, schema: SchemaConfig | None = None) -> None:
    """Write a Source as CSV with the schema's label/group column names."""
    schema = schema or SchemaConfig()
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(list(source.feature_names) + [schema.label_column, schema.group_column])
        for i in range(source.n_rows):
            row = [repr(float(v)) for v in source.features[i]]
            row.append(str(int(source.labels[i])))
            row.append(str(source.groups[i]))
            writer.writerow(row)


def stratified_folds(
    source: Source, spec: SplitSpec
) -> list[list[tuple[np.ndarray, np.ndarray]]]:
    """Label-stratified cross-validation folds, one list of folds per repeat.

    Deterministic given (source, spec): per repeat, each class is shuffled
    with a derived seed and dealt round-robin into validation folds, so the
    folds partition the index set and per-fold class counts differ by at
    most one.
    """
    pos = np.flatnonzero(source.labels == 1)
    neg = np.flatnonzero(source.labels == 0)
    if min(pos.size, neg.size) < spec.n_folds:
        raise TooFewExamples(
            f"need >= {spec.n_folds} examples per class, "
            f"got {pos.size} positive / {neg.size} negative"
        )
    all_repeats = []
    for repeat in range(spec.n_repeats):
        rng = np.random.default_rng(derive_seed(spec.seed, "folds", repeat))
        pos_perm = rng.permutation(pos)
        neg_perm = rng.permutation(neg)
        folds = []
        for f in range(spec.n_folds):
            val = np.sort(np.concatenate([pos_perm[f :: spec.n_folds], neg_perm[f :: spec.n_folds]]))
            train = np.setdiff1d(np.arange(source.n_rows), val, assume_unique=False)
            folds.append((train, val))
        all_repeats.append(folds)
    return all_repeats


def subsample(source: Source, n: int, seed: int) -> Source:
    """Uniform sample of ``n`` rows without replacement, deterministic given seed."""
    if n > source.n_rows:
        raise NotEnoughRows(f"asked for {n} rows, source {source.id!r} has {source.n_rows}")
    if n < 0:
        raise ValueError("n must be >= 0")
    rng = np.random.default_rng(seed)
    idx = np.sort(rng.choice(source.n_rows, size=n, replace=False))
    return source.take(idx, suffix=":sub")


def concat(sources: Sequence[Source]) -> Source:
    """Row-wise union of schema-compatible sources, preserving input order."""
    if not sources:
        raise ValueError("concat needs at least one source")
    first = sources[0]
    for other in sources[1:]:
        if other.feature_names != first.feature_names:
            raise SchemaMismatch(
                f"sources {first.id!r} and {other.id!r} have different feature names"
            )
    if len(sources) == 1:
        return first
    return Source(
        id="+".join(s.id for s in sources),
        features=np.concatenate([s.features for s in sources], axis=0),
        labels=np.concatenate([s.labels for s in sources]),
        groups=np.concatenate([s.groups for s in sources]),
        feature_names=first.feature_names,
    )
