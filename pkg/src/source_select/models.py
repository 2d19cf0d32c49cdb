"""From-scratch regularized logistic regression with standardization.

One deterministic model family backs everything in the package: the task
model evaluated on test sources and the domain classifier behind the
ratio/score heuristics. The fit minimizes

    mean weighted negative log-likelihood + (l2 / 2) * ||w||^2

(intercept unpenalized) by damped Newton descent from a zero start, so
identical inputs produce bit-identical parameters.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, EmptyMatrix, NonFinite, SingleClassUnregularized

DEFAULT_L2 = 1.0
DEFAULT_TOL = 1e-6
DEFAULT_MAX_ITERS = 1000


def scaled_l2(strength: float, n_rows: int) -> float:
    """Convert a summed-loss ridge strength into the mean-loss convention.

    ``fit_logistic`` penalizes the mean NLL, so a strength quoted against
    the summed NLL (the convention of common tooling, where 1.0 is the
    default) must be divided by the number of rows before use.
    """
    return float(strength) / max(1, int(n_rows))


@dataclass(frozen=True)
class Scaler:
    """Per-column standardization statistics; zero stds are replaced by 1."""

    means: np.ndarray
    stds: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "means", np.asarray(self.means, dtype=float))
        object.__setattr__(self, "stds", np.asarray(self.stds, dtype=float))


@dataclass(frozen=True)
class LogisticModel:
    """Fitted logistic regression parameters plus convergence metadata."""

    weights: np.ndarray
    intercept: float
    l2: float
    converged: bool
    n_iters: int

    def __post_init__(self):
        object.__setattr__(self, "weights", np.asarray(self.weights, dtype=float))


def fit_scaler(features) -> Scaler:
    """Fit per-column mean/std (population std; zeros substituted by 1)."""
    X = np.asarray(features, dtype=float)
    if X.ndim != 2 or X.shape[0] < 1:
        raise EmptyMatrix("scaler needs a matrix with at least one row")
    means = X.mean(axis=0)
    stds = X.std(axis=0)
    stds = np.where(stds == 0.0, 1.0, stds)
    return Scaler(means=means, stds=stds)


def apply_scaler(scaler: Scaler, features) -> np.ndarray:
    X = np.asarray(features, dtype=float)
    if X.ndim != 2 or X.shape[1] != scaler.means.shape[0]:
        raise DimensionMismatch(
            f"scaler was fit on d={scaler.means.shape[0]}, got shape {X.shape}"
        )
    return (X - scaler.means) / scaler.stds


def sigmoid(z: np.ndarray) -> np.ndarray:
    """Numerically stable logistic function (no overflow for |z| <= 700)."""
    z = np.asarray(z, dtype=float)
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def _softplus(z: np.ndarray) -> np.ndarray:
    # log(1 + e^z) without overflow
    return np.maximum(z, 0.0) + np.log1p(np.exp(-np.abs(z)))


def loss_and_grad(
    weights: np.ndarray,
    intercept: float,
    features: np.ndarray,
    labels: np.ndarray,
    l2: float,
    sample_weight: np.ndarray | None = None,
) -> tuple[float, np.ndarray, float]:
    """Penalized mean NLL and its analytic gradient at arbitrary parameters.

    Exposed so the analytic gradient can be checked against finite
    differences anywhere, not only at the fitted optimum.
    """
    X = np.asarray(features, dtype=float)
    y = np.asarray(labels, dtype=float)
    w = np.asarray(weights, dtype=float)
    n = X.shape[0]
    omega = np.ones(n) if sample_weight is None else np.asarray(sample_weight, dtype=float)
    z = X @ w + intercept
    loss = float(np.mean(omega * (_softplus(z) - y * z)) + 0.5 * l2 * (w @ w))
    p = sigmoid(z)
    resid = omega * (p - y) / n
    grad_w = X.T @ resid + l2 * w
    grad_b = float(resid.sum())
    return loss, grad_w, grad_b


def fit_logistic(
    features,
    labels,
    l2: float = DEFAULT_L2,
    tol: float = DEFAULT_TOL,
    max_iters: int = DEFAULT_MAX_ITERS,
    sample_weight=None,
) -> LogisticModel:
    """Fit logistic regression by damped Newton descent from a zero start.

    The caller standardizes features. ``sample_weight`` rescales each
    example's NLL contribution (normalized to mean 1 so the l2 scale is
    comparable across weightings). The convergence criterion is
    inf-norm(gradient) <= tol; the ``converged`` flag is honest.
    """
    X = np.asarray(features, dtype=float)
    y = np.asarray(labels, dtype=float)
    if X.ndim != 2 or X.shape[0] < 1:
        raise EmptyMatrix("fit needs a matrix with at least one row")
    if y.shape != (X.shape[0],):
        raise DimensionMismatch("labels must have one entry per row")
    if not np.isfinite(X).all() or not np.isfinite(y).all():
        raise NonFinite("non-finite values in fit inputs")
    classes = np.unique(y)
    if classes.size < 2 and l2 <= 0.0:
        raise SingleClassUnregularized(
            "single-class data has no finite optimum without l2 > 0"
        )

    n, d = X.shape
    if sample_weight is None:
        omega = np.ones(n)
    else:
        omega = np.asarray(sample_weight, dtype=float)
        if omega.shape != (n,) or (omega < 0).any() or omega.sum() <= 0:
            raise ValueError("sample_weight must be non-negative with positive sum")
        omega = omega * (n / omega.sum())

    Xb = np.hstack([X, np.ones((n, 1))])
    penalty = np.append(np.full(d, l2), 0.0)  # intercept unpenalized
    theta = np.zeros(d + 1)

    def loss_at(t):
        z = Xb @ t
        return float(np.mean(omega * (_softplus(z) - y * z)) + 0.5 * (penalty * t * t).sum())

    converged = False
    n_iters = 0
    current = loss_at(theta)
    for n_iters in range(1, max_iters + 1):
        z = Xb @ theta
        p = sigmoid(z)
        grad = Xb.T @ (omega * (p - y)) / n + penalty * theta
        if not np.isfinite(grad).all():
            raise NonFinite("non-finite gradient during fit")
        if np.max(np.abs(grad)) <= tol:
            converged = True
            n_iters -= 1  # no step taken this round
            break
        s = omega * p * (1.0 - p)
        hess = (Xb * s[:, None]).T @ Xb / n + np.diag(penalty)
        try:
            step = np.linalg.solve(hess, -grad)
        except np.linalg.LinAlgError:
            step = np.linalg.lstsq(hess, -grad, rcond=None)[0]
        slope = float(grad @ step)
        if slope >= 0:  # not a descent direction (numerically flat)
            break
        t = 1.0
        while True:
            candidate = loss_at(theta + t * step)
            if candidate <= current + 1e-4 * t * slope:
                break
            t *= 0.5
            if t < 1e-12:
                break
        if t < 1e-12:
            break
        theta = theta + t * step
        current = loss_at(theta)
        if not np.isfinite(current):
            raise NonFinite("non-finite loss during fit")

    return LogisticModel(
        weights=theta[:d].copy(),
        intercept=float(theta[d]),
        l2=float(l2),
        converged=converged,
        n_iters=n_iters,
    )


def predict_proba(model: LogisticModel, features) -> np.ndarray:
    """P(y=1 | x) = sigmoid(Xw + b); stable for |logit| up to 700."""
    X = np.asarray(features, dtype=float)
    if X.ndim != 2 or X.shape[1] != model.weights.shape[0]:
        raise DimensionMismatch(
            f"model has d={model.weights.shape[0]}, got shape {X.shape}"
        )
    return sigmoid(X @ model.weights + model.intercept)


def model_to_json(model: LogisticModel, scaler: Scaler | None = None) -> str:
    doc = {
        "weights": [float(v) for v in model.weights],
        "intercept": model.intercept,
        "l2": model.l2,
        "converged": model.converged,
        "n_iters": model.n_iters,
        "scaler": None
        if scaler is None
        else {
            "means": [float(v) for v in scaler.means],
            "stds": [float(v) for v in scaler.stds],
        },
    }
    return json.dumps(doc, sort_keys=True)


def model_from_json(text: str) -> tuple[LogisticModel, Scaler | None]:
    doc = json.loads(text)
    model = LogisticModel(
        weights=np.asarray(doc["weights"], dtype=float),
        intercept=float(doc["intercept"]),
        l2=float(doc["l2"]),
        converged=bool(doc["converged"]),
        n_iters=int(doc["n_iters"]),
    )
    scaler = None
    if doc.get("scaler") is not None:
        scaler = Scaler(
            means=np.asarray(doc["scaler"]["means"], dtype=float),
            stds=np.asarray(doc["scaler"]["stds"], dtype=float),
        )
    return model, scaler
