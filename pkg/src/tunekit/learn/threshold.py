"""Post-hoc decision-threshold tuning for classifiers.

Binary: line search over the midpoints of consecutive sorted unique scores
plus sentinel thresholds at both infinities; ties resolve to the smallest
threshold. Multiclass: positive per-class weights, prediction is
argmax_k p_k / w_k, optimized by random search on the simplex followed by
per-coordinate line refinement.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .. import metrics as _metrics
from ..errors import DataError


@dataclass
class ThresholdRule:
    """Either a scalar binary threshold or positive multiclass weights."""

    kind: str  # "binary" | "multiclass"
    threshold: float | None = None
    weights: np.ndarray | None = None
    probabilities: bool = True

    def __post_init__(self):
        if self.kind == "multiclass":
            w = np.asarray(self.weights, dtype=float)
            if np.any(w <= 0):
                raise DataError("threshold weights must be strictly positive")
            self.weights = w

    def apply_binary(self, scores: np.ndarray) -> np.ndarray:
        """Boolean positive-class decisions for a score vector."""
        if self.kind != "binary":
            raise DataError("binary rule required")
        return np.asarray(scores, dtype=float) >= self.threshold

    def apply_weights(self, probs: np.ndarray) -> np.ndarray:
        """Class-index decisions via argmax of p_k / w_k."""
        if self.kind != "multiclass":
            raise DataError("multiclass rule required")
        return np.argmax(np.asarray(probs, dtype=float) / self.weights, axis=1)


def _binary_metric_value(metric, y, decisions, classes, cost_matrix):
    yhat = [classes[1] if d else classes[0] for d in decisions]
    return _metrics.score_labels(metric, y, yhat, classes, cost_matrix=cost_matrix)


def _better(a: float, b: float | None, direction: str) -> bool:
    if b is None:
        return True
    return a > b if direction == "max" else a < b


def tune_threshold_binary(
    y,
    scores,
    metric,
    probabilities: bool = True,
    cost_matrix=None,
) -> tuple[ThresholdRule, float]:
    """Best threshold for a binary score vector under a label metric.

    Degenerate score vectors (single unique value) return the default rule
    (0.5 for probabilities, 0 for raw scores) and its achieved value.
    """
    metric = _metrics.get_metric(metric)
    y = np.asarray(y)
    scores = np.asarray(scores, dtype=float)
    classes = tuple(sorted(set(y.tolist())))
    if len(classes) != 2:
        raise DataError("threshold tuning needs both classes present")
    default_t = 0.5 if probabilities else 0.0
    uniq = np.unique(scores)
    if len(uniq) < 2:
        rule = ThresholdRule("binary", threshold=default_t, probabilities=probabilities)
        value = _binary_metric_value(metric, y, rule.apply_binary(scores), classes, cost_matrix)
        return rule, value
    candidates = [-math.inf] + ((uniq[:-1] + uniq[1:]) / 2.0).tolist() + [math.inf]
    best_t, best_v = None, None
    for t in candidates:  # ascending, so ties keep the smallest threshold
        value = _binary_metric_value(metric, y, scores >= t, classes, cost_matrix)
        if _better(value, best_v, metric.direction):
            best_t, best_v = t, value
    return ThresholdRule("binary", threshold=best_t, probabilities=probabilities), best_v


def _weights_metric_value(metric, y, probs, weights, classes, cost_matrix):
    idx = np.argmax(probs / weights, axis=1)
    yhat = [classes[i] for i in idx]
    return _metrics.score_labels(metric, y, yhat, classes, cost_matrix=cost_matrix)


def tune_threshold_weights(
    y,
    probs: np.ndarray,
    classes,
    metric,
    n_draws: int = 100,
    rng: np.random.Generator | None = None,
    cost_matrix=None,
) -> tuple[ThresholdRule, float]:
    """Multiclass weight search: uniform start, random simplex draws, refinement."""
    metric = _metrics.get_metric(metric)
    rng = rng or np.random.default_rng()
    probs = np.asarray(probs, dtype=float)
    classes = tuple(classes)
    g = len(classes)
    if probs.shape[1] != g:
        raise DataError("probability columns must match classes")
    if len(set(np.asarray(y).tolist())) < 2:
        raise DataError("threshold tuning needs >= 2 classes present")

    best_w = np.full(g, 1.0 / g)
    best_v = _weights_metric_value(metric, y, probs, best_w, classes, cost_matrix)
    for _ in range(n_draws):
        w = rng.dirichlet(np.ones(g))
        w = np.maximum(w, 1e-9)
        value = _weights_metric_value(metric, y, probs, w, classes, cost_matrix)
        if _better(value, best_v, metric.direction):
            best_w, best_v = w, value
    # one refinement sweep: per-coordinate multiplicative line search
    multipliers = np.geomspace(0.2, 5.0, 21)
    for k in range(g):
        for mult in multipliers:
            w = best_w.copy()
            w[k] *= mult
            w /= w.sum()
            value = _weights_metric_value(metric, y, probs, w, classes, cost_matrix)
            if _better(value, best_v, metric.direction):
                best_w, best_v = w, value
    return ThresholdRule("multiclass", weights=best_w), best_v
