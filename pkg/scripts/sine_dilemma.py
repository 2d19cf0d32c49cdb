#!/usr/bin/env python3
"""The two-source sine toy: when does adding source B hurt?

Source A labels follow sin(x) > 0, source B follows -sin(x) > 0, and the
test set comes from A's process. Training on A alone is accurate; adding
all of B (which outnumbers A nine to one) drags accuracy far below the
A-only baseline.
"""

import argparse

import numpy as np

from source_select.dataset import concat
from source_select.evaluation import accuracy_at_threshold
from source_select.models import (
    apply_scaler,
    fit_logistic,
    fit_scaler,
    predict_proba,
    scaled_l2,
)
from source_select.seeding import derive_seed
from source_select.synth import generate_sine_toy


def accuracy(train, test):
    scaler = fit_scaler(train.features)
    model = fit_logistic(
        apply_scaler(scaler, train.features), train.labels, l2=scaled_l2(1.0, train.n_rows)
    )
    scores = predict_proba(model, apply_scaler(scaler, test.features))
    return accuracy_at_threshold(scores, test.labels, 0.5)


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--seed", type=int, default=42)
    parser.add_argument("--n-seeds", type=int, default=50)
    parser.add_argument("--n-a", type=int, default=10)
    parser.add_argument("--n-b", type=int, default=90)
    parser.add_argument("--noise-sd", type=float, default=0.1)
    args = parser.parse_args()

    a_only, combined = [], []
    for rep in range(args.n_seeds):
        (a, b), test = generate_sine_toy(
            args.n_a, args.n_b, args.noise_sd, seed=derive_seed(args.seed, "sine", rep)
        )
        a_only.append(accuracy(a, test))
        combined.append(accuracy(concat([a, b]), test))

    a_only = np.asarray(a_only)
    combined = np.asarray(combined)
    gap = a_only - combined
    print(f"over {args.n_seeds} seeds (n_A={args.n_a}, n_B={args.n_b}):")
    print(f"  accuracy trained on A alone : {a_only.mean():.4f}")
    print(f"  accuracy trained on A + B   : {combined.mean():.4f}")
    print(
        f"  drop from adding B          : {gap.mean():.4f} "
        f"(stderr {gap.std(ddof=1) / np.sqrt(gap.size):.4f})"
    )


if __name__ == "__main__":
    main()
