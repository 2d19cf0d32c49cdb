import numpy as np
import pytest

from source_select.dataset import Source


def brute_force_auc(scores, labels):
    """O(n^2) pairwise AUC oracle with the 0.5 tie convention."""
    s = np.asarray(scores, dtype=float)
    y = np.asarray(labels, dtype=int)
    pos = s[y == 1]
    neg = s[y == 0]
    wins = (pos[:, None] > neg[None, :]).sum() + 0.5 * (pos[:, None] == neg[None, :]).sum()
    return float(wins) / (pos.size * neg.size)


def make_source(source_id, features, labels, groups=None, names=None):
    features = np.asarray(features, dtype=float)
    if features.ndim == 1:
        features = features.reshape(-1, 1)
    n, d = features.shape
    if groups is None:
        groups = np.full(n, "all")
    if names is None:
        names = tuple(f"x{j + 1}" for j in range(d))
    return Source(
        id=source_id,
        features=features,
        labels=np.asarray(labels, dtype=int),
        groups=np.asarray(groups, dtype=str),
        feature_names=tuple(names),
    )


@pytest.fixture
def gaussian_pair():
    """Two same-distribution sources, handy for null-calibration checks."""

    def build(seed, n=800, d=4, shift=0.0):
        rng = np.random.default_rng(seed)
        X = rng.normal(0.0, 1.0, size=(2 * n, d))
        X[n:] += shift
        labels = rng.integers(0, 2, size=2 * n)
        names = tuple(f"x{j + 1}" for j in range(d))
        p = make_source("p", X[:n], labels[:n], names=names)
        q = make_source("q", X[n:], labels[n:], names=names)
        return p, q

    return build
