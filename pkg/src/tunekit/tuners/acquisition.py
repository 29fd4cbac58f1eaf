"""Acquisition functions: expected improvement, (q)LCB.

All utilities are formulated for minimization of the underlying objective
and *maximized* by the proposal step.
"""

from __future__ import annotations

import numpy as np
from scipy.stats import norm


def expected_improvement(mean, sd, c_min: float) -> np.ndarray:
    """E[max(c_min - C, 0)] for C ~ N(mean, sd^2); sd = 0 takes the limit."""
    mean = np.asarray(mean, dtype=float)
    sd = np.asarray(sd, dtype=float)
    out = np.maximum(c_min - mean, 0.0)  # deterministic limit
    positive = sd > 0
    if np.any(positive):
        m, s = mean[positive], sd[positive]
        z = (c_min - m) / s
        out = out.copy()
        out[positive] = (c_min - m) * norm.cdf(z) + s * norm.pdf(z)
    return out


def lcb_utility(mean, sd, kappa: float) -> np.ndarray:
    """Negated lower confidence bound: -(mean - kappa * sd), to be maximized."""
    return -(np.asarray(mean, dtype=float) - kappa * np.asarray(sd, dtype=float))


def draw_qlcb_kappas(n: int, rng: np.random.Generator) -> np.ndarray:
    """Independent exploration weights, Exp(rate 1), one per batch slot."""
    return rng.exponential(1.0, size=n)
