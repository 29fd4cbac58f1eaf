"""Performance-metric catalogue.

Regression: mse, mae, r2. Label classification: acc, ba, ce, tpr, fpr, tnr,
fnr, ppv, npv, f1, cost. Probability/score classification: brier, logloss,
auc (binary). For binary metrics the positive class is the *last* class in
sorted label order.

Degenerate denominators (e.g. tpr with no positives) raise
:class:`MetricUndefinedError` rather than yielding NaN; resampled aggregation
skips and counts those splits.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.stats import rankdata

from .errors import DataError, MetricUndefinedError

LOG_EPS = 1e-15  # probability clipping for log-loss


@dataclass(frozen=True)
class Metric:
    id: str
    direction: str  # "min" | "max"
    needs: str  # "labels" | "scores" | "probabilities"
    task: str  # "regression" | "classification"


_CATALOGUE = {
    m.id: m
    for m in [
        Metric("mse", "min", "scores", "regression"),
        Metric("mae", "min", "scores", "regression"),
        Metric("r2", "max", "scores", "regression"),
        Metric("acc", "max", "labels", "classification"),
        Metric("ba", "max", "labels", "classification"),
        Metric("ce", "min", "labels", "classification"),
        Metric("tpr", "max", "labels", "classification"),
        Metric("fpr", "min", "labels", "classification"),
        Metric("tnr", "max", "labels", "classification"),
        Metric("fnr", "min", "labels", "classification"),
        Metric("ppv", "max", "labels", "classification"),
        Metric("npv", "max", "labels", "classification"),
        Metric("f1", "max", "labels", "classification"),
        Metric("cost", "min", "labels", "classification"),
        Metric("brier", "min", "probabilities", "classification"),
        Metric("logloss", "min", "probabilities", "classification"),
        Metric("auc", "max", "scores", "classification"),
    ]
}


def get_metric(metric) -> Metric:
    if isinstance(metric, Metric):
        return metric
    try:
        return _CATALOGUE[str(metric).lower()]
    except KeyError:
        raise DataError(f"unknown metric id {metric!r}") from None


def metric_ids() -> list[str]:
    return sorted(_CATALOGUE)


def _require(condition: bool, what: str):
    if not condition:
        raise MetricUndefinedError(what)


def _class_positions(y, classes: tuple) -> np.ndarray:
    pos = {c: i for i, c in enumerate(classes)}
    try:
        return np.asarray([pos[v] for v in y], dtype=int)
    except KeyError as exc:
        raise DataError(f"label {exc.args[0]!r} not among prediction classes") from None


def _binary_counts(y, yhat, classes: tuple) -> tuple[int, int, int, int]:
    if len(classes) != 2:
        raise DataError("binary metric on a non-binary prediction")
    positive = classes[1]
    yt = np.asarray([v == positive for v in y])
    yp = np.asarray([v == positive for v in yhat])
    tp = int(np.sum(yt & yp))
    fp = int(np.sum(~yt & yp))
    tn = int(np.sum(~yt & ~yp))
    fn = int(np.sum(yt & ~yp))
    return tp, fp, tn, fn


def auc_rank(y01: np.ndarray, scores: np.ndarray) -> float:
    """Binary AUC via the rank (Mann-Whitney) formula, ties get half credit."""
    y01 = np.asarray(y01, dtype=bool)
    n_pos = int(y01.sum())
    n_neg = int((~y01).sum())
    _require(n_pos > 0 and n_neg > 0, "auc needs both classes present")
    ranks = rankdata(np.asarray(scores, dtype=float))  # average ranks on ties
    r_pos = float(ranks[y01].sum())
    return (r_pos - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg)


def score(metric, y_true, prediction, cost_matrix: np.ndarray | None = None) -> float:
    """Evaluate one metric on (labels, prediction matrix).

    ``prediction`` is a :class:`tunekit.data.PredictionMatrix`; metrics with a
    probability requirement insist on its ``probabilities`` flag.
    """
    metric = get_metric(metric)
    F = prediction
    y = np.asarray(y_true)
    if len(y) != F.m:
        raise DataError("y length != prediction rows")

    if metric.task == "regression":
        if F.g != 1:
            raise DataError("regression metrics need a single prediction column")
        yhat = F.values[:, 0]
        yf = np.asarray(y, dtype=float)
        if metric.id == "mse":
            return float(np.mean((yf - yhat) ** 2))
        if metric.id == "mae":
            return float(np.mean(np.abs(yf - yhat)))
        # r2
        denom = float(np.sum((yf - yf.mean()) ** 2))
        _require(denom > 0.0, "r2 undefined for constant targets")
        return 1.0 - float(np.sum((yf - yhat) ** 2)) / denom

    classes = F.classes
    if classes is None:
        raise DataError("classification metric needs prediction classes")

    if metric.needs == "probabilities" and not F.probabilities:
        raise DataError(f"{metric.id} needs probability predictions")

    if metric.id == "auc":
        if len(classes) != 2:
            raise DataError("auc implemented for binary tasks only")
        y01 = np.asarray([v == classes[1] for v in y])
        return auc_rank(y01, F.values[:, 1])

    if metric.id in ("brier", "logloss"):
        pos = _class_positions(y, classes)
        onehot = np.zeros((len(y), len(classes)))
        onehot[np.arange(len(y)), pos] = 1.0
        if metric.id == "brier":
            return float(np.mean(np.sum((F.values - onehot) ** 2, axis=1)))
        p_true = np.clip(F.values[np.arange(len(y)), pos], LOG_EPS, 1.0 - LOG_EPS)
        return float(np.mean(-np.log(p_true)))

    # label-based metrics
    yhat = F.labels()
    if metric.id in ("acc", "ce"):
        acc = float(np.mean([a == b for a, b in zip(y, yhat)]))
        return acc if metric.id == "acc" else 1.0 - acc
    if metric.id == "ba":
        recalls = []
        for c in classes:
            mask = np.asarray([v == c for v in y])
            _require(mask.sum() > 0, f"ba undefined: class {c!r} absent from y")
            recalls.append(float(np.mean([yhat[i] == c for i in np.flatnonzero(mask)])))
        return float(np.mean(recalls))
    if metric.id == "cost":
        if cost_matrix is None:
            raise DataError("cost metric needs a cost matrix")
        C = np.asarray(cost_matrix, dtype=float)
        if C.shape != (len(classes), len(classes)):
            raise DataError(f"cost matrix must be {len(classes)}x{len(classes)}")
        ti = _class_positions(y, classes)
        pi = _class_positions(yhat, classes)
        return float(np.sum(C[ti, pi]))

    tp, fp, tn, fn = _binary_counts(y, yhat, classes)
    if metric.id in ("tpr", "fnr"):
        _require(tp + fn > 0, f"{metric.id} undefined with no positives")
        tpr = tp / (tp + fn)
        return tpr if metric.id == "tpr" else 1.0 - tpr
    if metric.id in ("fpr", "tnr"):
        _require(tn + fp > 0, f"{metric.id} undefined with no negatives")
        fpr = fp / (tn + fp)
        return fpr if metric.id == "fpr" else 1.0 - fpr
    if metric.id == "ppv":
        _require(tp + fp > 0, "ppv undefined with no positive predictions")
        return tp / (tp + fp)
    if metric.id == "npv":
        _require(tn + fn > 0, "npv undefined with no negative predictions")
        return tn / (tn + fn)
    if metric.id == "f1":
        _require(tp + fp > 0, "f1 undefined with no positive predictions")
        _require(tp + fn > 0, "f1 undefined with no positives")
        ppv = tp / (tp + fp)
        tpr = tp / (tp + fn)
        _require(ppv + tpr > 0, "f1 undefined when ppv + tpr = 0")
        return 2.0 * ppv * tpr / (ppv + tpr)
    raise DataError(f"unhandled metric {metric.id}")  # pragma: no cover


def score_labels(metric, y_true, y_pred, classes: tuple, cost_matrix=None) -> float:
    """Shortcut for label metrics when predicted labels are already at hand."""
    from .data import PredictionMatrix  # local import to avoid a cycle

    classes = tuple(classes)
    pos = {c: i for i, c in enumerate(classes)}
    values = np.zeros((len(y_pred), len(classes)))
    for i, v in enumerate(y_pred):
        values[i, pos[v]] = 1.0
    pm = PredictionMatrix(values=values, probabilities=True, classes=classes)
    return score(metric, y_true, pm, cost_matrix=cost_matrix)
