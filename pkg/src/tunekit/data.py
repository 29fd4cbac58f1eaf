"""Datasets, train/test splitting and resampled generalization-error estimates.

A :class:`Dataset` is a column table (numeric columns are float arrays with
NaN for missing cells, categorical columns are object arrays with None) plus
a target vector. A :class:`ResamplingPlan` is an ordered list of
(train, test) index pairs; :func:`estimate_ge` runs a learner over the plan
and aggregates per-split metric values.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import metrics as _metrics
from .errors import DataError, MetricUndefinedError, TrainingError
from .rng import derive

NUMERIC = "numeric"
CATEGORICAL = "categorical"
MISSING_TOKENS = ("", "NA")


@dataclass
class Dataset:
    """Feature table plus target. ``task`` is ``regression`` or ``classification``."""

    feature_names: list[str]
    feature_types: list[str]
    columns: list[np.ndarray]
    target: np.ndarray
    task: str

    def __post_init__(self):
        if self.task not in ("regression", "classification"):
            raise DataError(f"unknown task {self.task!r}")
        if len(self.feature_names) != len(set(self.feature_names)):
            raise DataError("duplicate column names")
        if len(self.feature_names) != len(self.columns) or len(self.feature_names) != len(
            self.feature_types
        ):
            raise DataError("feature names/types/columns lengths disagree")
        n = len(self.target)
        if n < 1:
            raise DataError("dataset needs at least one row")
        for name, col in zip(self.feature_names, self.columns):
            if len(col) != n:
                raise DataError(f"column {name!r} length != target length")
        if self.task == "classification":
            if any(v is None for v in self.target):
                raise DataError("target has missing entries")
        else:
            self.target = np.asarray(self.target, dtype=float)
            if np.isnan(self.target).any():
                raise DataError("target has missing entries")

    @property
    def n(self) -> int:
        return len(self.target)

    @property
    def p(self) -> int:
        return len(self.columns)

    @property
    def classes(self) -> tuple:
        if self.task != "classification":
            raise DataError("classes only defined for classification")
        return tuple(sorted(set(self.target.tolist())))

    def subset(self, indices: Sequence[int]) -> "Dataset":
        idx = np.asarray(indices, dtype=int)
        return Dataset(
            feature_names=list(self.feature_names),
            feature_types=list(self.feature_types),
            columns=[col[idx] for col in self.columns],
            target=self.target[idx],
            task=self.task,
        )

    def numeric_matrix(self) -> np.ndarray:
        """(n, p) float matrix; requires all columns numeric."""
        bad = [n for n, t in zip(self.feature_names, self.feature_types) if t != NUMERIC]
        if bad:
            raise DataError(f"non-numeric columns present: {bad}")
        if not self.columns:
            return np.zeros((self.n, 0))
        return np.column_stack([np.asarray(c, dtype=float) for c in self.columns])

    def has_missing(self) -> bool:
        for col, t in zip(self.columns, self.feature_types):
            if t == NUMERIC:
                if np.isnan(np.asarray(col, dtype=float)).any():
                    return True
            elif any(v is None for v in col):
                return True
        return False


def make_dataset(X: np.ndarray, y: Sequence, task: str, names: list[str] | None = None) -> Dataset:
    """Convenience constructor from a dense numeric matrix."""
    X = np.asarray(X, dtype=float)
    if X.ndim != 2:
        raise DataError("X must be 2-d")
    names = names or [f"x{i}" for i in range(X.shape[1])]
    y = np.asarray(y) if task == "classification" else np.asarray(y, dtype=float)
    return Dataset(
        feature_names=names,
        feature_types=[NUMERIC] * X.shape[1],
        columns=[X[:, j].copy() for j in range(X.shape[1])],
        target=y,
        task=task,
    )


@dataclass
class PredictionMatrix:
    """(m, g) score matrix. ``probabilities`` means each row sums to one.

    For regression g = 1 and ``classes`` is None. For classification the
    columns follow ``classes`` (sorted label order).
    """

    values: np.ndarray
    probabilities: bool
    classes: tuple | None = None

    def __post_init__(self):
        self.values = np.atleast_2d(np.asarray(self.values, dtype=float))
        if self.probabilities:
            sums = self.values.sum(axis=1)
            if np.any(np.abs(sums - 1.0) > 1e-9) or np.any(self.values < -1e-12):
                raise DataError("probability rows must be non-negative and sum to 1")

    @property
    def m(self) -> int:
        return self.values.shape[0]

    @property
    def g(self) -> int:
        return self.values.shape[1]

    def labels(self) -> np.ndarray:
        """Predicted labels via row-wise argmax (column order = classes)."""
        if self.classes is None:
            raise DataError("labels() needs a classification prediction matrix")
        idx = np.argmax(self.values, axis=1)
        return np.asarray([self.classes[i] for i in idx], dtype=object)

    def positive_scores(self) -> np.ndarray:
        """Binary convenience: score column of the positive (last) class."""
        if self.classes is None or len(self.classes) != 2:
            raise DataError("positive_scores() needs a binary prediction matrix")
        return self.values[:, 1]


@dataclass
class ResamplingPlan:
    """Ordered (train, test) index pairs."""

    splits: list[tuple[np.ndarray, np.ndarray]]

    def __post_init__(self):
        self.splits = [
            (np.asarray(tr, dtype=int), np.asarray(te, dtype=int)) for tr, te in self.splits
        ]

    @property
    def B(self) -> int:
        return len(self.splits)

    def check(self, n: int) -> None:
        """Assert the constructor invariants (disjoint, in-range)."""
        for i, (tr, te) in enumerate(self.splits):
            if len(tr) == 0 or len(te) == 0:
                raise DataError(f"split {i}: empty train or test")
            if tr.min() < 0 or te.min() < 0 or tr.max() >= n or te.max() >= n:
                raise DataError(f"split {i}: index out of range")
            if np.intersect1d(tr, te).size:
                raise DataError(f"split {i}: train and test overlap")

    def mean_train_size(self) -> float:
        return float(np.mean([len(tr) for tr, _ in self.splits]))


def _stratified_deal(y: np.ndarray, k: int, rng: np.random.Generator) -> list[np.ndarray]:
    """Deal indices to k folds, class by class, in one cyclic stream.

    Keeps per-class fold counts within one of the proportional share and
    total fold sizes within one of each other.
    """
    labels = sorted(set(y.tolist()))
    stream: list[int] = []
    for lab in labels:
        idx = np.flatnonzero(np.asarray([v == lab for v in y]))
        stream.extend(rng.permutation(idx).tolist())
    folds: list[list[int]] = [[] for _ in range(k)]
    for pos, index in enumerate(stream):
        folds[pos % k].append(index)
    return [np.asarray(sorted(f), dtype=int) for f in folds]


def make_holdout(
    n: int,
    train_fraction: float = 2.0 / 3.0,
    y: np.ndarray | None = None,
    rng: np.random.Generator | None = None,
) -> ResamplingPlan:
    """Single random split with |train| = round(train_fraction * n).

    Passing ``y`` stratifies the split, preserving class proportions within
    one observation per class.
    """
    if n < 2:
        raise DataError("holdout needs n >= 2")
    if not 0.0 < train_fraction < 1.0:
        raise DataError("train_fraction must be in (0, 1)")
    rng = rng or np.random.default_rng()
    n_train = int(round(train_fraction * n))
    n_train = min(max(n_train, 1), n - 1)
    if y is None:
        perm = rng.permutation(n)
        train, test = perm[:n_train], perm[n_train:]
        return ResamplingPlan([(np.sort(train), np.sort(test))])

    y = np.asarray(y)
    labels = sorted(set(y.tolist()))
    counts = {lab: int(sum(1 for v in y if v == lab)) for lab in labels}
    if any(c < 2 for c in counts.values()):
        raise DataError("stratified holdout needs >= 2 observations per class")
    # proportional shares, then largest-remainder rounding to hit n_train
    train_idx: list[int] = []
    shares = {lab: train_fraction * counts[lab] for lab in labels}
    base = {lab: int(math.floor(shares[lab])) for lab in labels}
    for lab in labels:
        base[lab] = min(max(base[lab], 1), counts[lab] - 1)
    remainder = n_train - sum(base.values())
    order = sorted(labels, key=lambda lab: shares[lab] - math.floor(shares[lab]), reverse=True)
    pos = 0
    while remainder != 0 and pos < 10 * len(labels):
        lab = order[pos % len(labels)]
        if remainder > 0 and base[lab] < counts[lab] - 1:
            base[lab] += 1
            remainder -= 1
        elif remainder < 0 and base[lab] > 1:
            base[lab] -= 1
            remainder += 1
        pos += 1
    for lab in labels:
        idx = np.flatnonzero(np.asarray([v == lab for v in y]))
        perm = rng.permutation(idx)
        train_idx.extend(perm[: base[lab]].tolist())
    train = np.asarray(sorted(train_idx), dtype=int)
    test = np.asarray(sorted(set(range(n)) - set(train_idx)), dtype=int)
    return ResamplingPlan([(train, test)])


def make_kfold(
    n: int,
    k: int,
    repeats: int = 1,
    y: np.ndarray | None = None,
    rng: np.random.Generator | None = None,
) -> ResamplingPlan:
    """(Repeated, optionally stratified) k-fold cross-validation plan.

    Each repeat reshuffles; within a repeat the test folds partition the
    indices with sizes differing by at most one.
    """
    if k < 2 or k > n:
        raise DataError(f"need 2 <= k <= n, got k={k}, n={n}")
    if repeats < 1:
        raise DataError("repeats must be >= 1")
    rng = rng or np.random.default_rng()
    splits: list[tuple[np.ndarray, np.ndarray]] = []
    for _ in range(repeats):
        if y is None:
            perm = rng.permutation(n)
            folds = [np.sort(part) for part in np.array_split(perm, k)]
        else:
            folds = _stratified_deal(np.asarray(y), k, rng)
        all_idx = set(range(n))
        for f in folds:
            train = np.asarray(sorted(all_idx - set(f.tolist())), dtype=int)
            splits.append((train, f))
    plan = ResamplingPlan(splits)
    plan.check(n)
    return plan


def subsample_indices(
    y: np.ndarray | None,
    indices: np.ndarray,
    fraction: float,
    rng: np.random.Generator,
    minimum: int = 2,
) -> np.ndarray:
    """Without-replacement subsample of ``indices`` (stratified when y given)."""
    m = len(indices)
    size = max(minimum, int(math.floor(fraction * m)))
    size = min(size, m)
    if size == m:
        return np.asarray(indices, dtype=int)
    if y is None:
        pick = rng.choice(m, size=size, replace=False)
        return np.sort(np.asarray(indices)[pick])
    # stratified: shuffle within class, take proportional heads
    sub_y = np.asarray(y)[indices]
    labels = sorted(set(sub_y.tolist()))
    chosen: list[int] = []
    shares = [(lab, size * sum(1 for v in sub_y if v == lab) / m) for lab in labels]
    base = {lab: int(math.floor(s)) for lab, s in shares}
    rem = size - sum(base.values())
    for lab, s in sorted(shares, key=lambda t: t[1] - math.floor(t[1]), reverse=True):
        if rem <= 0:
            break
        base[lab] += 1
        rem -= 1
    for lab in labels:
        local = np.flatnonzero(np.asarray([v == lab for v in sub_y]))
        perm = rng.permutation(local)
        chosen.extend(np.asarray(indices)[perm[: base[lab]]].tolist())
    return np.asarray(sorted(chosen), dtype=int)


@dataclass
class GEEstimate:
    """Aggregate resampled score plus the per-split values behind it."""

    aggregate: float
    per_split: list[float | None]
    n_undefined: int
    mean_train_size: float

    @property
    def defined_splits(self) -> list[float]:
        return [s for s in self.per_split if s is not None]


def evaluate_split(
    learner,
    params: dict,
    dataset: Dataset,
    train_idx: np.ndarray,
    test_idx: np.ndarray,
    metric,
    rng: np.random.Generator,
) -> float | None:
    """Train on one split and score the test predictions.

    Returns None when the metric is undefined on this split; training and
    prediction failures raise :class:`TrainingError`.
    """
    metric = _metrics.get_metric(metric)
    train_data = dataset.subset(train_idx)
    test_data = dataset.subset(test_idx)
    model = learner.train(train_data, params, rng)
    pred = model.predict(test_data)
    try:
        return float(_metrics.score(metric, test_data.target, pred))
    except MetricUndefinedError:
        return None


def aggregate_splits(
    per_split: Sequence[float | None],
    agr: Callable[[Sequence[float]], float] | None = None,
) -> float:
    defined = [s for s in per_split if s is not None]
    if not defined:
        raise MetricUndefinedError("metric undefined on every split")
    agr = agr or (lambda xs: float(np.mean(xs)))
    return float(agr(defined))


def estimate_ge(
    learner,
    params: dict,
    dataset: Dataset,
    plan: ResamplingPlan,
    metric: "_metrics.Metric | str",
    agr: Callable[[Sequence[float]], float] | None = None,
    master_seed: int = 0,
    train_index_override: Callable[[int, np.ndarray], np.ndarray] | None = None,
) -> GEEstimate:
    """Resampled generalization-error estimate of ``learner`` under ``params``.

    Trains on each split's train indices, scores predictions on the test
    indices and aggregates (mean by default). Undefined metric values are
    skipped and counted. Per-split learner streams derive from
    (master_seed, split index). ``train_index_override`` lets callers thin
    the per-split training set (subsampling fidelity).
    """
    metric = _metrics.get_metric(metric)
    per_split: list[float | None] = []
    for j, (train_idx, test_idx) in enumerate(plan.splits):
        if train_index_override is not None:
            train_idx = train_index_override(j, train_idx)
        rng = derive(master_seed, "split", j)
        try:
            per_split.append(
                evaluate_split(learner, params, dataset, train_idx, test_idx, metric, rng)
            )
        except TrainingError as exc:
            raise TrainingError(f"split {j}: {exc}", split=j) from exc
    return GEEstimate(
        aggregate=aggregate_splits(per_split, agr),
        per_split=per_split,
        n_undefined=sum(1 for s in per_split if s is None),
        mean_train_size=plan.mean_train_size(),
    )


# ---------------------------------------------------------------------------
# CSV ingestion

def _format_cell(value, numeric: bool) -> str:
    if numeric:
        if value is None or (isinstance(value, float) and math.isnan(value)):
            return "NA"
        return repr(float(value))
    return "NA" if value is None else str(value)


def write_csv(dataset: Dataset, path_or_buf, target_name: str = "target") -> None:
    own = isinstance(path_or_buf, (str,)) or hasattr(path_or_buf, "__fspath__")
    handle = open(path_or_buf, "w", newline="") if own else path_or_buf
    try:
        writer = csv.writer(handle)
        writer.writerow(list(dataset.feature_names) + [target_name])
        for i in range(dataset.n):
            row = [
                _format_cell(col[i], t == NUMERIC)
                for col, t in zip(dataset.columns, dataset.feature_types)
            ]
            tgt = dataset.target[i]
            row.append(repr(float(tgt)) if dataset.task == "regression" else str(tgt))
            writer.writerow(row)
    finally:
        if own:
            handle.close()


def read_csv(path_or_buf, target: str, task: str) -> Dataset:
    """Parse a headered CSV; missing cells are '' or 'NA'.

    Columns whose non-missing cells all parse as floats become numeric,
    everything else categorical.
    """
    own = isinstance(path_or_buf, (str,)) or hasattr(path_or_buf, "__fspath__")
    handle = open(path_or_buf, "r", newline="") if own else path_or_buf
    try:
        reader = csv.reader(handle)
        rows = [r for r in reader if r]
    finally:
        if own:
            handle.close()
    if not rows:
        raise DataError("empty CSV")
    header = rows[0]
    if target not in header:
        raise DataError(f"target column {target!r} not in header")
    t_pos = header.index(target)
    body = rows[1:]
    if not body:
        raise DataError("CSV has no data rows")
    names = [h for i, h in enumerate(header) if i != t_pos]
    raw_cols: list[list[str]] = [[] for _ in names]
    raw_target: list[str] = []
    for r in body:
        if len(r) != len(header):
            raise DataError(f"row with {len(r)} cells, expected {len(header)}")
        k = 0
        for i, cell in enumerate(r):
            if i == t_pos:
                raw_target.append(cell)
            else:
                raw_cols[k].append(cell)
                k += 1
    columns: list[np.ndarray] = []
    types: list[str] = []
    for cells in raw_cols:
        parsed: list[float] = []
        numeric = True
        for c in cells:
            if c in MISSING_TOKENS:
                parsed.append(math.nan)
                continue
            try:
                parsed.append(float(c))
            except ValueError:
                numeric = False
                break
        if numeric:
            columns.append(np.asarray(parsed, dtype=float))
            types.append(NUMERIC)
        else:
            columns.append(
                np.asarray([None if c in MISSING_TOKENS else c for c in cells], dtype=object)
            )
            types.append(CATEGORICAL)
    if task == "regression":
        try:
            y = np.asarray([float(c) for c in raw_target], dtype=float)
        except ValueError as exc:
            raise DataError(f"non-numeric regression target: {exc}") from exc
    else:
        if any(c in MISSING_TOKENS for c in raw_target):
            raise DataError("target has missing entries")
        y = np.asarray(raw_target, dtype=object)
    return Dataset(names, types, columns, y, task)


def csv_roundtrip(dataset: Dataset) -> Dataset:
    buf = io.StringIO()
    write_csv(dataset, buf)
    buf.seek(0)
    return read_csv(buf, target="target", task=dataset.task)
