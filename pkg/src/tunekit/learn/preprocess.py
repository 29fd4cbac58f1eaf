"""Preprocessing operators: impute, one-hot, standardize, filter, subsample.

Each operator fits its state on training data only and replays that state at
prediction time, so embedding one in a pipeline cannot leak test information.
"""

from __future__ import annotations

import numpy as np

from ..data import CATEGORICAL, NUMERIC, Dataset
from ..errors import DataError
from ..space import ParamSpec, SearchSpace

MISSING_LEVEL = "__missing__"


class Preprocessor:
    id: str = ""
    train_only: bool = False  # op only rewrites training data (e.g. subsampling)

    def space_preset(self) -> SearchSpace | None:
        return None

    def default_params(self) -> dict:
        return {}

    def fit(self, data: Dataset, params: dict, rng) -> "FittedOp":
        raise NotImplementedError


class FittedOp:
    train_only = False

    def transform(self, data: Dataset) -> Dataset:
        raise NotImplementedError


class _FittedImpute(FittedOp):
    def __init__(self, fills: dict, indicator_cols: list[str], add_indicator: bool):
        self.fills = fills
        self.indicator_cols = indicator_cols
        self.add_indicator = add_indicator

    def transform(self, data: Dataset) -> Dataset:
        names = list(data.feature_names)
        types = list(data.feature_types)
        cols = []
        for name, t, col in zip(data.feature_names, data.feature_types, data.columns):
            if t == NUMERIC:
                arr = np.asarray(col, dtype=float).copy()
                if name in self.fills:
                    arr[np.isnan(arr)] = self.fills[name]
                cols.append(arr)
            else:
                cols.append(
                    np.asarray([MISSING_LEVEL if v is None else v for v in col], dtype=object)
                )
        if self.add_indicator:
            for name in self.indicator_cols:
                j = data.feature_names.index(name)
                arr = np.asarray(data.columns[j], dtype=float)
                names.append(f"{name}__was_na")
                types.append(NUMERIC)
                cols.append(np.isnan(arr).astype(float))
        return Dataset(names, types, cols, data.target, data.task)


class ImputeOp(Preprocessor):
    """Numeric fill with a training statistic, categorical missing level.

    With ``add_indicator`` every numeric column that had missing training
    cells gains one extra binary was-missing column.
    """

    id = "impute"

    def __init__(self, add_indicator: bool = True):
        self.add_indicator = add_indicator

    def space_preset(self) -> SearchSpace:
        return SearchSpace(
            [ParamSpec("strategy", "categorical", levels=("mean", "median", "constant"))]
        )

    def default_params(self) -> dict:
        return {"strategy": "mean"}

    def fit(self, data: Dataset, params: dict, rng) -> FittedOp:
        strategy = params.get("strategy", "mean")
        fills: dict[str, float] = {}
        indicator_cols: list[str] = []
        for name, t, col in zip(data.feature_names, data.feature_types, data.columns):
            if t != NUMERIC:
                continue
            arr = np.asarray(col, dtype=float)
            mask = np.isnan(arr)
            if strategy == "constant":
                fills[name] = 0.0
            elif mask.all():
                fills[name] = 0.0
            elif strategy == "median":
                fills[name] = float(np.median(arr[~mask]))
            else:
                fills[name] = float(np.mean(arr[~mask]))
            if mask.any():
                indicator_cols.append(name)
        return _FittedImpute(fills, indicator_cols, self.add_indicator)


class _FittedOneHot(FittedOp):
    def __init__(self, levels_by_col: dict[str, list], drop_last: bool):
        self.levels_by_col = levels_by_col
        self.drop_last = drop_last

    def transform(self, data: Dataset) -> Dataset:
        names, types, cols = [], [], []
        for name, t, col in zip(data.feature_names, data.feature_types, data.columns):
            if t == NUMERIC:
                names.append(name)
                types.append(NUMERIC)
                cols.append(np.asarray(col, dtype=float))
                continue
            levels = self.levels_by_col[name]
            emit = levels[:-1] if self.drop_last else levels
            for lev in emit:  # unseen prediction levels encode as all zeros
                names.append(f"{name}={lev}")
                types.append(NUMERIC)
                cols.append(np.asarray([1.0 if v == lev else 0.0 for v in col]))
        return Dataset(names, types, cols, data.target, data.task)


class OneHotOp(Preprocessor):
    """Replace each categorical k-level column with k (or k-1) indicators."""

    id = "onehot"

    def __init__(self, drop_last: bool = False):
        self.drop_last = drop_last

    def fit(self, data: Dataset, params: dict, rng) -> FittedOp:
        levels_by_col = {}
        for name, t, col in zip(data.feature_names, data.feature_types, data.columns):
            if t == CATEGORICAL:
                levels_by_col[name] = sorted({v for v in col if v is not None})
        return _FittedOneHot(levels_by_col, self.drop_last)


class _FittedStandardize(FittedOp):
    def __init__(self, stats: dict):
        self.stats = stats

    def transform(self, data: Dataset) -> Dataset:
        cols = []
        for name, t, col in zip(data.feature_names, data.feature_types, data.columns):
            if t == NUMERIC and name in self.stats:
                mean, sd = self.stats[name]
                cols.append((np.asarray(col, dtype=float) - mean) / sd)
            else:
                cols.append(col)
        return Dataset(
            list(data.feature_names), list(data.feature_types), cols, data.target, data.task
        )


class StandardizeOp(Preprocessor):
    id = "standardize"

    def fit(self, data: Dataset, params: dict, rng) -> FittedOp:
        stats = {}
        for name, t, col in zip(data.feature_names, data.feature_types, data.columns):
            if t != NUMERIC:
                continue
            arr = np.asarray(col, dtype=float)
            valid = arr[~np.isnan(arr)]
            mean = float(np.mean(valid)) if valid.size else 0.0
            sd = float(np.std(valid)) if valid.size else 1.0
            stats[name] = (mean, max(sd, 1e-12))
        return _FittedStandardize(stats)


class _FittedFilter(FittedOp):
    def __init__(self, keep: list[str]):
        self.keep = keep

    def transform(self, data: Dataset) -> Dataset:
        names, types, cols = [], [], []
        for name, t, col in zip(data.feature_names, data.feature_types, data.columns):
            if name in self.keep:
                names.append(name)
                types.append(t)
                cols.append(col)
        return Dataset(names, types, cols, data.target, data.task)


def _abs_corr(x: np.ndarray, y: np.ndarray) -> float:
    mask = ~np.isnan(x)
    if mask.sum() < 2:
        return 0.0
    xv, yv = x[mask], y[mask]
    sx, sy = np.std(xv), np.std(yv)
    if sx <= 0 or sy <= 0:
        return 0.0
    return float(abs(np.mean((xv - xv.mean()) * (yv - yv.mean())) / (sx * sy)))


class CorrFilterOp(Preprocessor):
    """Keep the top fraction of numeric columns by |correlation with target|.

    Classification targets are scored one-vs-rest, taking the best class.
    Categorical columns pass through untouched.
    """

    id = "filter"

    def space_preset(self) -> SearchSpace:
        return SearchSpace([ParamSpec("phi", "real", lower=0.05, upper=1.0)])

    def default_params(self) -> dict:
        return {"phi": 1.0}

    def fit(self, data: Dataset, params: dict, rng) -> FittedOp:
        phi = float(params.get("phi", 1.0))
        if not 0.0 < phi <= 1.0:
            raise DataError(f"filter fraction must be in (0, 1], got {phi}")
        if data.task == "regression":
            targets = [np.asarray(data.target, dtype=float)]
        else:
            targets = [
                np.asarray([float(v == c) for v in data.target]) for c in data.classes
            ]
        scored = []
        for name, t, col in zip(data.feature_names, data.feature_types, data.columns):
            if t != NUMERIC:
                continue
            x = np.asarray(col, dtype=float)
            scored.append((name, max(_abs_corr(x, ytgt) for ytgt in targets)))
        n_keep = max(1, int(np.ceil(phi * len(scored)))) if scored else 0
        ranked = sorted(scored, key=lambda kv: -kv[1])  # stable: ties keep column order
        keep = {name for name, _ in ranked[:n_keep]}
        keep_order = [
            n
            for n, t in zip(data.feature_names, data.feature_types)
            if t == CATEGORICAL or n in keep
        ]
        return _FittedFilter(keep_order)


class _FittedSubsample(FittedOp):
    train_only = True

    def __init__(self, indices: np.ndarray):
        self.indices = indices

    def transform(self, data: Dataset) -> Dataset:
        return data.subset(self.indices)


class SubsampleOp(Preprocessor):
    """Training-set thinning; prediction data passes through untouched."""

    id = "subsample"
    train_only = True

    def space_preset(self) -> SearchSpace:
        return SearchSpace([ParamSpec("fraction", "real", lower=0.1, upper=1.0)])

    def default_params(self) -> dict:
        return {"fraction": 1.0}

    def fit(self, data: Dataset, params: dict, rng) -> FittedOp:
        from ..data import subsample_indices

        fraction = float(params.get("fraction", 1.0))
        if not 0.0 < fraction <= 1.0:
            raise DataError(f"subsample fraction must be in (0, 1], got {fraction}")
        y = data.target if data.task == "classification" else None
        idx = subsample_indices(y, np.arange(data.n), fraction, rng)
        return _FittedSubsample(idx)


OP_REGISTRY = {
    "impute": ImputeOp,
    "onehot": OneHotOp,
    "standardize": StandardizeOp,
    "filter": CorrFilterOp,
    "subsample": SubsampleOp,
}
