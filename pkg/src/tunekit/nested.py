"""Self-tuning learner wrapper and nested resampling.

Training a :class:`TunedLearner` is a two-step procedure: run the tuner
against an inner resampled objective built on the given data, then refit the
wrapped learner on all of that data with the chosen configuration. Nested
evaluation wraps this in an outer resampling loop whose test sets stay
untouched by the inner search; an explicit index-containment guard asserts
this on every run.
"""

from __future__ import annotations

import threading
import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import metrics as _metrics
from .data import Dataset, GEEstimate, ResamplingPlan, make_holdout, make_kfold
from .errors import LeakageError, TunekitError
from .objective import Archive, FidelitySpec, Objective, ResampledObjective, incumbent
from .parallel import run_jobs
from .rng import derive
from .space import Config, SearchSpace
from .tuners.base import TerminationStack, Tuner, TuningResult, run_tuning

# global tally of leakage-guard activity, for auditing test runs
_GUARD_LOCK = threading.Lock()
GUARD_STATS = {"checks": 0, "violations": 0}


@dataclass(frozen=True)
class HoldoutSpec:
    fraction: float = 2.0 / 3.0
    stratify: bool = False

    def instantiate(self, dataset: Dataset, rng) -> ResamplingPlan:
        y = dataset.target if (self.stratify and dataset.task == "classification") else None
        return make_holdout(dataset.n, self.fraction, y=y, rng=rng)


@dataclass(frozen=True)
class KFoldSpec:
    k: int = 3
    repeats: int = 1
    stratify: bool = False

    def instantiate(self, dataset: Dataset, rng) -> ResamplingPlan:
        y = dataset.target if (self.stratify and dataset.task == "classification") else None
        return make_kfold(dataset.n, self.k, repeats=self.repeats, y=y, rng=rng)


def leakage_guard(
    outer_train: np.ndarray, outer_test: np.ndarray, inner_plan: ResamplingPlan
) -> None:
    """Assert each inner split indexes only into the outer training set.

    Inner plans are built on the outer-train subset, so their indices are
    relative; this maps them back to absolute row ids and checks containment
    and emptiness of the intersection with the outer test set.
    """
    outer_train = np.asarray(outer_train)
    train_set = set(outer_train.tolist())
    test_set = set(np.asarray(outer_test).tolist())
    with _GUARD_LOCK:
        GUARD_STATS["checks"] += 1
    for j, (tr, te) in enumerate(inner_plan.splits):
        for rel in (tr, te):
            if len(rel) and (rel.min() < 0 or rel.max() >= len(outer_train)):
                with _GUARD_LOCK:
                    GUARD_STATS["violations"] += 1
                raise LeakageError(f"inner split {j} indexes outside the outer training set")
            absolute = set(outer_train[rel].tolist())
            if not absolute <= train_set or absolute & test_set:
                with _GUARD_LOCK:
                    GUARD_STATS["violations"] += 1
                raise LeakageError(f"inner split {j} leaks into the outer test set")


@dataclass
class FittedTunedLearner:
    chosen: Config
    model: object
    inner_archive: Archive
    stop_reason: str
    tune_seconds: float
    refit_seconds: float

    def predict(self, data: Dataset):
        return self.model.predict(data)


@dataclass
class TunedLearner:
    """Learner with integrated tuning: tune on the data, then refit on all of it."""

    learner: object
    metric: object
    inner: object = field(default_factory=lambda: KFoldSpec(3))
    tuner_factory: Callable[[SearchSpace, int], Tuner] | None = None
    termination: TerminationStack | None = None
    space: SearchSpace | None = None
    n_batch: int = 1
    fidelity: FidelitySpec | None = None

    def _space(self) -> SearchSpace:
        return self.space if self.space is not None else self.learner.space_preset()

    def _make_tuner(self, space: SearchSpace, seed: int):
        if self.tuner_factory is None:
            from .tuners.grid_random import RandomTuner

            return RandomTuner(space, seed=seed)
        return self.tuner_factory(space, seed)

    def build_objective(self, dataset: Dataset, master_seed: int) -> ResampledObjective:
        plan = self.inner.instantiate(dataset, derive(master_seed, "inner-plan"))
        return ResampledObjective(
            self.learner,
            self._space(),
            dataset,
            plan,
            self.metric,
            master_seed=int(derive(master_seed, "objective").integers(2**63)),
            fidelity=self.fidelity,
        )

    def train(
        self,
        dataset: Dataset,
        master_seed: int = 0,
        workers: int = 1,
        level: str = "config",
        outer_context: tuple[np.ndarray, np.ndarray] | None = None,
    ) -> FittedTunedLearner:
        termination = self.termination or TerminationStack(max_evals=20)
        space = self._space()
        objective = self.build_objective(dataset, master_seed)
        if outer_context is not None:
            leakage_guard(outer_context[0], outer_context[1], objective.plan)
        tuner = self._make_tuner(space, int(derive(master_seed, "tuner-seed").integers(2**31)))
        t0 = time.perf_counter()
        if hasattr(tuner, "propose"):
            result = run_tuning(
                objective, tuner, termination, n_batch=self.n_batch, workers=workers, level=level
            )
        else:  # run-style driver (iterated racing)
            tuner.run(objective)
            result = TuningResult(objective.archive, "driver", None)
        tune_seconds = time.perf_counter() - t0
        best = incumbent(objective.archive)
        params = best.config.transformed(space)
        t0 = time.perf_counter()
        model = self.learner.train(dataset, params, derive(master_seed, "refit"))
        refit_seconds = time.perf_counter() - t0
        return FittedTunedLearner(
            chosen=best.config,
            model=model,
            inner_archive=objective.archive,
            stop_reason=result.stop_reason,
            tune_seconds=tune_seconds,
            refit_seconds=refit_seconds,
        )


@dataclass
class OuterFoldReport:
    fold: int
    score: float | None
    chosen: Config | None
    inner_best_score: float | None
    inner_archive: Archive | None
    tune_seconds: float
    refit_seconds: float
    eval_seconds: float
    error: str | None = None


@dataclass
class NestedReport:
    per_fold: list[OuterFoldReport]
    aggregate: float | None
    sd: float | None
    metric_id: str

    @property
    def inner_best_mean(self) -> float | None:
        vals = [f.inner_best_score for f in self.per_fold if f.inner_best_score is not None]
        return float(np.mean(vals)) if vals else None


def nested_evaluate(
    tuned: TunedLearner,
    dataset: Dataset,
    outer_plan: ResamplingPlan,
    master_seed: int = 0,
    workers: int = 1,
    level: str = "config",
) -> NestedReport:
    """Outer-resampled evaluation of a self-tuning learner.

    Each outer fold tunes on its training subset (fresh tuner state), refits
    with the chosen configuration and scores once on the untouched outer
    test rows. ``level`` picks the parallelization granularity: ``outer``
    parallelizes folds, every other level is forwarded to the inner
    evaluation loop.
    """
    metric = _metrics.get_metric(tuned.metric)
    outer_plan.check(dataset.n)

    def fold_job(j: int) -> OuterFoldReport:
        train_idx, test_idx = outer_plan.splits[j]
        sub = dataset.subset(train_idx)
        seed = int(derive(master_seed, "outer", j).integers(2**63))
        inner_level = level if level != "outer" else "config"
        inner_workers = workers if level != "outer" else 1
        try:
            fitted = tuned.train(
                sub,
                master_seed=seed,
                workers=inner_workers,
                level=inner_level,
                outer_context=(train_idx, test_idx),
            )
        except TunekitError as exc:
            return OuterFoldReport(j, None, None, None, None, 0.0, 0.0, 0.0, error=str(exc))
        t0 = time.perf_counter()
        test_data = dataset.subset(test_idx)
        pred = fitted.predict(test_data)
        try:
            value = float(_metrics.score(metric, test_data.target, pred))
            err = None
        except _metrics.MetricUndefinedError as exc:
            value, err = None, str(exc)
        eval_seconds = time.perf_counter() - t0
        best = incumbent(fitted.inner_archive)
        return OuterFoldReport(
            fold=j,
            score=value,
            chosen=fitted.chosen,
            inner_best_score=best.score,
            inner_archive=fitted.inner_archive,
            tune_seconds=fitted.tune_seconds,
            refit_seconds=fitted.refit_seconds,
            eval_seconds=eval_seconds,
            error=err,
        )

    jobs = [(lambda j=j: fold_job(j)) for j in range(outer_plan.B)]
    reports = run_jobs(jobs, workers if level == "outer" else 1)
    scores = [r.score for r in reports if r.score is not None]
    aggregate = float(np.mean(scores)) if scores else None
    sd = float(np.std(scores, ddof=1)) if len(scores) > 1 else None
    return NestedReport(reports, aggregate, sd, metric.id)
