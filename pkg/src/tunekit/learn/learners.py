"""Built-in desk-scale learners: k-NN, elastic net, CART-lite, featureless."""

from __future__ import annotations

import math

import numpy as np
from scipy.spatial.distance import cdist
from scipy.stats import norm

from ..data import Dataset, PredictionMatrix
from ..errors import TrainingError
from ..space import Condition, ParamSpec, SearchSpace
from .base import Capabilities, Learner, Model, register

# ---------------------------------------------------------------------------
# k-nearest neighbours with distance-kernel weighting

KNN_KERNELS = ("rectangular", "optimal", "epanechnikov", "gaussian", "inv", "rank")


def _kernel_weights(kernel: str, dists: np.ndarray, k: int, n_features: int) -> np.ndarray:
    """Weights for the k nearest neighbours of one query point.

    ``dists`` holds the k neighbour distances plus, when available, the
    (k+1)-th distance used for normalization.
    """
    d_norm = dists[k] if len(dists) > k else dists[k - 1]
    if d_norm <= 0:
        w = np.zeros(k)
    else:
        w = dists[:k] / d_norm
    w = np.clip(w, 1e-6, 1.0 - 1e-6)
    if kernel == "rectangular":
        return np.ones(k)
    if kernel == "epanechnikov":
        return 0.75 * (1.0 - w**2)
    if kernel == "gaussian":
        q = abs(norm.ppf(1.0 / (2.0 * (k + 1))))
        return np.exp(-0.5 * (w * q) ** 2)
    if kernel == "inv":
        return 1.0 / w
    if kernel == "rank":
        return np.arange(k, 0, -1, dtype=float)
    if kernel == "optimal":
        d = max(n_features, 1)
        i = np.arange(1, k + 1, dtype=float)
        terms = i ** (1.0 + 2.0 / d) - (i - 1.0) ** (1.0 + 2.0 / d)
        wk = (1.0 / k) * (1.0 + d / 2.0 - d / (2.0 * k ** (2.0 / d)) * terms)
        return np.clip(wk, 0.0, None)
    raise TrainingError(f"unknown knn kernel {kernel!r}")


class KNNModel(Model):
    def __init__(self, learner_id, X, y, classes, k, p, kernel):
        super().__init__(learner_id, n_train=len(y))
        self.X, self.y, self.classes = X, y, classes
        self.k, self.p, self.kernel = k, p, kernel

    def predict(self, data: Dataset) -> PredictionMatrix:
        Q = data.numeric_matrix()
        if Q.shape[1] != self.X.shape[1]:
            raise TrainingError("prediction features do not match training features")
        D = cdist(Q, self.X, metric="minkowski", p=self.p)
        take = min(self.k + 1, self.X.shape[0])
        rows = []
        for i in range(Q.shape[0]):
            order = np.argsort(D[i], kind="stable")[:take]
            w = _kernel_weights(self.kernel, D[i][order], self.k, self.X.shape[1])
            if w.sum() <= 0:
                w = np.ones(self.k)
            neigh = order[: self.k]
            if self.classes is None:
                rows.append([float(np.average(self.y[neigh].astype(float), weights=w))])
            else:
                votes = np.zeros(len(self.classes))
                for wi, j in zip(w, neigh):
                    votes[self.classes.index(self.y[j])] += wi
                rows.append((votes / votes.sum()).tolist())
        values = np.asarray(rows)
        if self.classes is None:
            return PredictionMatrix(values, probabilities=False)
        return PredictionMatrix(values, probabilities=True, classes=self.classes)


class KNNLearner(Learner):
    id = "knn"
    capabilities = Capabilities(handles_missing=False, handles_categorical=False)

    def space_preset(self) -> SearchSpace:
        return SearchSpace(
            [
                ParamSpec("k", "real", lower=math.log(1), upper=math.log(50), trafo="exp_floor"),
                ParamSpec("p", "real", lower=1.0, upper=5.0),
                ParamSpec("kernel", "categorical", levels=KNN_KERNELS),
            ]
        )

    def default_params(self) -> dict:
        return {"k": 7, "p": 2.0, "kernel": "optimal"}

    def _fit(self, data: Dataset, params: dict, rng) -> Model:
        k = int(params["k"])
        if k < 1:
            raise TrainingError(f"knn needs k >= 1, got {k}")
        if k > data.n:
            raise TrainingError(f"knn needs k <= n_train ({data.n}), got {k}")
        kernel = str(params["kernel"])
        if kernel not in KNN_KERNELS:
            raise TrainingError(f"unknown knn kernel {kernel!r}")
        classes = list(data.classes) if data.task == "classification" else None
        return KNNModel(
            self.id, data.numeric_matrix(), data.target, classes, k, float(params["p"]), kernel
        )


# ---------------------------------------------------------------------------
# elastic net by proximal gradient (regression and binary logistic)


def _soft_threshold(z: np.ndarray, t: float) -> np.ndarray:
    return np.sign(z) * np.maximum(np.abs(z) - t, 0.0)


def _prox_gradient(grad_fn, theta0: np.ndarray, step: float, l1: float, max_iter: int, tol: float):
    theta = theta0.copy()
    for _ in range(max_iter):
        new = _soft_threshold(theta - step * grad_fn(theta), step * l1)
        if np.max(np.abs(new - theta)) < tol:
            return new
        theta = new
    return theta


def fit_elastic_net_regression(
    X: np.ndarray,
    y: np.ndarray,
    reg: float,
    alpha: float,
    max_iter: int = 10_000,
    tol: float = 1e-8,
) -> tuple[np.ndarray, float]:
    """Minimize (1/2n)||y - b - X theta||^2 + reg*((1-alpha)/2 ||theta||^2 + alpha ||theta||_1).

    The intercept b is unpenalized and handled by centering. Returns
    (slopes, intercept).
    """
    n, p = X.shape
    x_mean = X.mean(axis=0)
    y_mean = float(np.mean(y))
    Xc = X - x_mean
    yc = y - y_mean
    # gradient Lipschitz bound from the sum of squared column norms
    lip = float(np.sum(Xc**2)) / n + reg * (1.0 - alpha)
    if lip <= 0:
        return np.zeros(p), y_mean
    step = 1.0 / lip

    def grad(theta):
        return Xc.T @ (Xc @ theta - yc) / n + reg * (1.0 - alpha) * theta

    theta = _prox_gradient(grad, np.zeros(p), step, reg * alpha, max_iter, tol)
    return theta, y_mean - float(x_mean @ theta)


def fit_elastic_net_logistic(
    X: np.ndarray,
    y01: np.ndarray,
    reg: float,
    alpha: float,
    max_iter: int = 10_000,
    tol: float = 1e-8,
) -> tuple[np.ndarray, float]:
    """Binary logistic deviance plus the elastic-net penalty on the slopes."""
    n, p = X.shape
    x_mean = X.mean(axis=0)
    Xc = X - x_mean
    lip = 0.25 * (float(np.sum(Xc**2)) + n) / n + reg * (1.0 - alpha)
    step = 1.0 / lip
    w = np.zeros(p + 1)  # [intercept, slopes]

    def grad(wv):
        eta = wv[0] + Xc @ wv[1:]
        resid = 1.0 / (1.0 + np.exp(-eta)) - y01
        g = np.empty_like(wv)
        g[0] = float(np.mean(resid))
        g[1:] = Xc.T @ resid / n + reg * (1.0 - alpha) * wv[1:]
        return g

    for _ in range(max_iter):
        new = w - step * grad(w)
        new[1:] = _soft_threshold(new[1:], step * reg * alpha)
        if np.max(np.abs(new - w)) < tol:
            w = new
            break
        w = new
    theta = w[1:]
    return theta, float(w[0]) - float(x_mean @ theta)


class ElasticNetModel(Model):
    def __init__(self, learner_id, theta, intercept, classes, n_train):
        super().__init__(learner_id, n_train)
        self.theta, self.intercept, self.classes = theta, intercept, classes

    def predict(self, data: Dataset) -> PredictionMatrix:
        X = data.numeric_matrix()
        eta = X @ self.theta + self.intercept
        if self.classes is None:
            return PredictionMatrix(eta.reshape(-1, 1), probabilities=False)
        p1 = 1.0 / (1.0 + np.exp(-eta))
        return PredictionMatrix(
            np.column_stack([1.0 - p1, p1]), probabilities=True, classes=self.classes
        )


class ElasticNetLearner(Learner):
    id = "elastic_net"
    capabilities = Capabilities(handles_missing=False, handles_categorical=False)

    def space_preset(self) -> SearchSpace:
        return SearchSpace(
            [
                ParamSpec("reg", "real", lower=-12.0, upper=12.0, trafo="pow2"),
                ParamSpec("alpha", "real", lower=0.0, upper=1.0),
            ]
        )

    def default_params(self) -> dict:
        return {"reg": 1.0, "alpha": 1.0}

    def _fit(self, data: Dataset, params: dict, rng) -> Model:
        reg = float(params["reg"])
        alpha = float(params["alpha"])
        if reg < 0 or not 0.0 <= alpha <= 1.0:
            raise TrainingError(f"invalid elastic-net parameters reg={reg}, alpha={alpha}")
        X = data.numeric_matrix()
        if data.task == "regression":
            theta, b = fit_elastic_net_regression(X, data.target, reg, alpha)
            return ElasticNetModel(self.id, theta, b, None, data.n)
        classes = list(data.classes)
        if len(classes) != 2:
            raise TrainingError("elastic_net classification is binary only")
        y01 = np.asarray([v == classes[1] for v in data.target], dtype=float)
        theta, b = fit_elastic_net_logistic(X, y01, reg, alpha)
        return ElasticNetModel(self.id, theta, b, classes, data.n)


# ---------------------------------------------------------------------------
# CART-lite: greedy axis-aligned binary splits, cp-gated


class _TreeNode:
    __slots__ = ("feature", "cut", "left", "right", "value")

    def __init__(self, value=None):
        self.feature = None
        self.cut = None
        self.left = None
        self.right = None
        self.value = value  # leaf payload: class proportions or mean


def _node_impurity(y, classes) -> float:
    """Size-weighted impurity: n*gini for classification, SSE for regression."""
    n = len(y)
    if classes is not None:
        props = np.asarray([np.mean([v == c for v in y]) for c in classes])
        return n * (1.0 - float(np.sum(props**2)))
    arr = np.asarray(y, dtype=float)
    return float(np.sum((arr - arr.mean()) ** 2))


def _leaf_value(y, classes):
    if classes is not None:
        return np.asarray([np.mean([v == c for v in y]) for c in classes])
    return float(np.mean(np.asarray(y, dtype=float)))


def _build_tree(X, y, classes, minsplit, minbucket, cp_threshold):
    node = _TreeNode(value=_leaf_value(y, classes))
    n = len(y)
    if n < minsplit:
        return node
    parent_imp = _node_impurity(y, classes)
    if parent_imp <= 0:
        return node
    best = None  # (reduction, feature, cut, mask)
    for j in range(X.shape[1]):
        col = X[:, j]
        for cut in np.unique(col)[:-1]:  # last value would leave an empty right side
            mask = col <= cut
            nl = int(mask.sum())
            if nl < minbucket or n - nl < minbucket:
                continue
            red = (
                parent_imp
                - _node_impurity(y[mask], classes)
                - _node_impurity(y[~mask], classes)
            )
            if best is None or red > best[0] + 1e-12:
                best = (red, j, float(cut), mask)
    if best is None or best[0] < cp_threshold or best[0] <= 0:
        return node
    _, j, cut, mask = best
    node.feature = j
    node.cut = cut
    node.left = _build_tree(X[mask], y[mask], classes, minsplit, minbucket, cp_threshold)
    node.right = _build_tree(X[~mask], y[~mask], classes, minsplit, minbucket, cp_threshold)
    return node


class CARTModel(Model):
    def __init__(self, learner_id, root, classes, n_train):
        super().__init__(learner_id, n_train)
        self.root, self.classes = root, classes

    def predict(self, data: Dataset) -> PredictionMatrix:
        X = data.numeric_matrix()
        rows = []
        for i in range(X.shape[0]):
            node = self.root
            while node.feature is not None:
                node = node.left if X[i, node.feature] <= node.cut else node.right
            rows.append(node.value if self.classes is not None else [node.value])
        values = np.asarray(rows, dtype=float)
        if self.classes is None:
            return PredictionMatrix(values, probabilities=False)
        return PredictionMatrix(values, probabilities=True, classes=self.classes)


class CARTLearner(Learner):
    id = "cart"
    capabilities = Capabilities(handles_missing=False, handles_categorical=False)

    def space_preset(self) -> SearchSpace:
        return SearchSpace(
            [
                ParamSpec("minsplit", "integer", lower=1, upper=7, trafo="pow2"),
                ParamSpec("minbucket", "integer", lower=0, upper=6, trafo="pow2"),
                ParamSpec("cp", "real", lower=-4.0, upper=-1.0, trafo="pow10"),
            ]
        )

    def default_params(self) -> dict:
        return {"minsplit": 20, "minbucket": None, "cp": 0.01}

    def _fit(self, data: Dataset, params: dict, rng) -> Model:
        minsplit = max(2, int(round(float(params["minsplit"]))))
        minbucket = params.get("minbucket")
        minbucket = int(round(minsplit / 3)) if minbucket is None else int(round(float(minbucket)))
        minbucket = max(1, minbucket)
        cp = float(params["cp"])
        if cp < 0:
            raise TrainingError(f"cart needs cp >= 0, got {cp}")
        X = data.numeric_matrix()
        classes = list(data.classes) if data.task == "classification" else None
        root_imp = _node_impurity(data.target, classes)
        root = _build_tree(X, data.target, classes, minsplit, minbucket, cp * root_imp)
        return CARTModel(self.id, root, classes, data.n)


# ---------------------------------------------------------------------------
# featureless baselines


class FeaturelessModel(Model):
    def __init__(self, learner_id, classes, payload, n_train):
        super().__init__(learner_id, n_train)
        self.classes = classes
        self.payload = payload

    def predict(self, data: Dataset) -> PredictionMatrix:
        m = data.n
        if self.classes is None:
            return PredictionMatrix(np.full((m, 1), self.payload), probabilities=False)
        return PredictionMatrix(
            np.tile(self.payload, (m, 1)), probabilities=True, classes=self.classes
        )


class FeaturelessLearner(Learner):
    """Mean predictor (regression) or training-frequency predictor (classification)."""

    id = "featureless"
    capabilities = Capabilities(handles_missing=True, handles_categorical=True)

    def space_preset(self) -> SearchSpace:
        return SearchSpace([ParamSpec("dummy", "real", lower=0.0, upper=1.0)])

    def default_params(self) -> dict:
        return {"dummy": 0.5}

    def _fit(self, data: Dataset, params: dict, rng) -> Model:
        if data.task == "regression":
            return FeaturelessModel(self.id, None, float(np.mean(data.target)), data.n)
        classes = list(data.classes)
        freqs = np.asarray([np.mean([v == c for v in data.target]) for c in classes])
        return FeaturelessModel(self.id, classes, freqs, data.n)


class RandomLabelModel(Model):
    """Ignores the features and emits uniformly random class labels.

    Stochastic predictor: each call consumes the model's stream, so repeated
    predictions differ but a fixed (seed, call order) replays exactly.
    """

    def __init__(self, learner_id, classes, rng, n_train):
        super().__init__(learner_id, n_train)
        self.classes = classes
        self._rng = rng

    def predict(self, data: Dataset) -> PredictionMatrix:
        m = data.n
        g = len(self.classes)
        picks = self._rng.integers(0, g, size=m)
        values = np.zeros((m, g))
        values[np.arange(m), picks] = 1.0
        return PredictionMatrix(values, probabilities=True, classes=self.classes)


class RandomLabelLearner(Learner):
    """Balanced random-label classifier with one inert hyperparameter."""

    id = "featureless_random"
    capabilities = Capabilities(
        tasks=("classification",), handles_missing=True, handles_categorical=True
    )

    def space_preset(self) -> SearchSpace:
        return SearchSpace([ParamSpec("dummy", "real", lower=0.0, upper=1.0)])

    def default_params(self) -> dict:
        return {"dummy": 0.5}

    def _fit(self, data: Dataset, params: dict, rng) -> Model:
        return RandomLabelModel(self.id, list(data.classes), rng, data.n)


register("knn", KNNLearner)
register("elastic_net", ElasticNetLearner)
register("cart", CARTLearner)
register("featureless", FeaturelessLearner)
register("featureless_random", RandomLabelLearner)
