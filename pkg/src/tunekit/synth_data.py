"""Deterministic synthetic datasets bundled for tests, demos and the CLI."""

from __future__ import annotations

import numpy as np

from .data import Dataset, make_dataset
from .rng import derive


def separable_classification(n: int = 150, seed: int = 0) -> Dataset:
    """Two well-separated Gaussian blobs in two dimensions, labels a/b."""
    rng = derive(seed, "separable")
    half = n // 2
    X0 = rng.normal(loc=(-2.0, -2.0), scale=0.5, size=(half, 2))
    X1 = rng.normal(loc=(2.0, 2.0), scale=0.5, size=(n - half, 2))
    X = np.vstack([X0, X1])
    y = np.asarray(["a"] * half + ["b"] * (n - half), dtype=object)
    perm = rng.permutation(n)
    return make_dataset(X[perm], y[perm], task="classification")


def overlapping_classification(n: int = 150, seed: int = 0, distance: float = 1.6) -> Dataset:
    """Two overlapping blobs; Bayes error decreases smoothly with distance."""
    rng = derive(seed, "overlap")
    half = n // 2
    offset = distance / 2.0
    X0 = rng.normal(loc=(-offset, 0.0), scale=1.0, size=(half, 2))
    X1 = rng.normal(loc=(offset, 0.0), scale=1.0, size=(n - half, 2))
    X = np.vstack([X0, X1])
    y = np.asarray(["a"] * half + ["b"] * (n - half), dtype=object)
    perm = rng.permutation(n)
    return make_dataset(X[perm], y[perm], task="classification")


def noisy_linear_regression(n: int = 120, seed: int = 0, noise_sd: float = 0.5) -> Dataset:
    """y = 2 x1 - 1.5 x2 + 0.5 + Gaussian noise, features uniform on [-1, 1]."""
    rng = derive(seed, "linreg")
    X = rng.uniform(-1.0, 1.0, size=(n, 3))
    y = 2.0 * X[:, 0] - 1.5 * X[:, 1] + 0.5 + rng.normal(0.0, noise_sd, size=n)
    return make_dataset(X, y, task="regression")


def balanced_binary_noise(n: int = 100, seed: int = 0, p: int = 3) -> Dataset:
    """Pure-noise features with an exactly balanced binary target."""
    if n % 2:
        raise ValueError("balanced binary target needs even n")
    rng = derive(seed, "balanced")
    X = rng.normal(size=(n, p))
    y = np.asarray(["neg"] * (n // 2) + ["pos"] * (n // 2), dtype=object)
    perm = rng.permutation(n)
    return make_dataset(X, y[perm], task="classification")


BUNDLED = {
    "separable_classification": separable_classification,
    "overlapping_classification": overlapping_classification,
    "noisy_linear_regression": noisy_linear_regression,
    "balanced_binary_noise": balanced_binary_noise,
}
