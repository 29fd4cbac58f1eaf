"""Learner and model interfaces plus the id registry."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from ..data import Dataset, PredictionMatrix
from ..errors import DataError, TrainingError
from ..space import SearchSpace


@dataclass(frozen=True)
class Capabilities:
    tasks: tuple[str, ...] = ("regression", "classification")
    handles_missing: bool = False
    handles_categorical: bool = False
    probabilistic: bool = True


class Learner:
    """Trainable predictor. Subclasses implement ``_fit`` and a space preset.

    ``params`` passed to :meth:`train` are learner-scale values (search-space
    transformations already applied); missing entries fall back to the
    preset defaults.
    """

    id: str = ""
    capabilities = Capabilities()

    def space_preset(self) -> SearchSpace:
        raise NotImplementedError

    def default_params(self) -> dict:
        return {}

    def _check_data(self, data: Dataset):
        if data.task not in self.capabilities.tasks:
            raise TrainingError(f"{self.id} does not support {data.task}")
        if not self.capabilities.handles_missing and data.has_missing():
            raise TrainingError(f"{self.id} cannot handle missing values")
        if not self.capabilities.handles_categorical and "categorical" in data.feature_types:
            raise TrainingError(f"{self.id} cannot handle categorical features")

    def train(self, data: Dataset, params: dict, rng: np.random.Generator) -> "Model":
        self._check_data(data)
        merged = dict(self.default_params())
        merged.update(params or {})
        return self._fit(data, merged, rng)

    def _fit(self, data: Dataset, params: dict, rng: np.random.Generator) -> "Model":
        raise NotImplementedError


class Model:
    """Fitted state. ``predict`` returns one prediction row per input row."""

    def __init__(self, learner_id: str, n_train: int):
        self.learner_id = learner_id
        self.n_train = n_train

    def predict(self, data: Dataset) -> PredictionMatrix:
        raise NotImplementedError


_REGISTRY: dict[str, Callable[[], Learner]] = {}


def register(learner_id: str, factory: Callable[[], Learner]) -> None:
    _REGISTRY[learner_id] = factory


def learner_ids() -> list[str]:
    return sorted(_REGISTRY)


def get_learner(learner_id: str):
    """Resolve a learner or pipeline preset from its id string.

    Plain ids name built-in learners; ``pipe:op+op+<learner>`` builds a
    linear pipeline and ``branch:<a>|<b>`` a two-way learner branch.
    """
    from .pipeline import pipeline_from_id  # lazy: pipelines depend on learners

    if learner_id.startswith(("pipe:", "branch:")):
        return pipeline_from_id(learner_id)
    try:
        return _REGISTRY[learner_id]()
    except KeyError:
        raise DataError(f"unknown learner id {learner_id!r}") from None
