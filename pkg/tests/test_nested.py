import math

import numpy as np
import pytest

import tunekit as tk
from tunekit.errors import LeakageError
from tunekit.learn import get_learner
from tunekit.nested import (
    GUARD_STATS,
    HoldoutSpec,
    KFoldSpec,
    TunedLearner,
    leakage_guard,
    nested_evaluate,
)
from tunekit.rng import derive
from tunekit.synth_data import (
    balanced_binary_noise,
    overlapping_classification,
    separable_classification,
)
from tunekit.tuners import ESTuner, GridTuner, RandomTuner, TerminationStack


def make_tl(learner_id="knn", space=None, max_evals=10, inner=None, tuner=None, metric="ce"):
    return TunedLearner(
        learner=get_learner(learner_id),
        metric=metric,
        inner=inner or HoldoutSpec(2 / 3),
        tuner_factory=tuner or (lambda s, seed: RandomTuner(s, seed=seed)),
        termination=TerminationStack(max_evals=max_evals),
        space=space,
    )


class TestTunedTrain:
    def test_single_point_space_equals_plain_training(self):
        space = tk.SearchSpace(
            [tk.ParamSpec("dummy", "categorical", levels=("only", "other"))]
        )
        # grid over a two-level inert parameter: both evaluated, incumbent refit
        ds = separable_classification(40, seed=0)
        tl = make_tl(
            "featureless_random",
            space=space,
            tuner=lambda s, seed: GridTuner(s, resolution=2, seed=seed),
            max_evals=5,
        )
        fitted = tl.train(ds, master_seed=1)
        assert fitted.chosen["dummy"] in ("only", "other")
        assert fitted.model.n_train == ds.n
        assert len(fitted.inner_archive) == 2

    def test_inert_learner_trains_and_refits(self):
        ds = balanced_binary_noise(60, seed=1)
        tl = make_tl("featureless_random", max_evals=6)
        fitted = tl.train(ds, master_seed=2)
        assert fitted.model.predict(ds).m == ds.n
        assert fitted.stop_reason == "max_evals"

    def test_knn_grid_matches_bruteforce_argmin(self):
        ds = overlapping_classification(90, seed=2)
        space = tk.SearchSpace(
            [tk.ParamSpec("k", "real", lower=0.0, upper=math.log(50), trafo="exp_floor")]
        )
        tl = TunedLearner(
            learner=get_learner("knn"),
            metric="ce",
            inner=KFoldSpec(3),
            tuner_factory=lambda s, seed: GridTuner(s, resolution=3, seed=seed),
            termination=TerminationStack(max_evals=10),
            space=space,
        )
        fitted = tl.train(ds, master_seed=3)
        # oracle: replay the same three candidates through the same objective
        objective = tl.build_objective(ds, 3)
        scores = []
        for cfg in tk.grid(space, 3):
            scores.append((objective.evaluate(cfg).score, cfg))
        best = min(scores, key=lambda t: t[0])
        assert fitted.chosen == best[1]


class TestLeakageGuard:
    def test_clean_plan_passes(self):
        outer_train = np.asarray([0, 1, 2, 3, 4, 5])
        outer_test = np.asarray([6, 7, 8])
        inner = tk.make_kfold(6, 3, rng=derive(0, "g"))
        before = GUARD_STATS["checks"]
        leakage_guard(outer_train, outer_test, inner)
        assert GUARD_STATS["checks"] == before + 1

    def test_out_of_range_relative_index_caught(self):
        inner = tk.ResamplingPlan([(np.asarray([0, 1]), np.asarray([7]))])
        with pytest.raises(LeakageError):
            leakage_guard(np.asarray([0, 1, 2]), np.asarray([3]), inner)

    def test_nested_runs_never_trip_the_guard(self):
        ds = balanced_binary_noise(60, seed=3)
        tl = make_tl("featureless_random", max_evals=5, inner=KFoldSpec(2))
        outer = tk.make_kfold(ds.n, 3, rng=derive(1, "g"))
        before = GUARD_STATS["violations"]
        nested_evaluate(tl, ds, outer, master_seed=4)
        assert GUARD_STATS["violations"] == before


class TestNestedEvaluate:
    def test_structure_of_report(self):
        ds = overlapping_classification(60, seed=4)
        tl = make_tl(max_evals=6)
        outer = tk.make_kfold(ds.n, 3, rng=derive(2, "n"))
        report = nested_evaluate(tl, ds, outer, master_seed=5)
        assert len(report.per_fold) == 3
        assert all(f.chosen is not None for f in report.per_fold)
        assert report.aggregate == pytest.approx(
            np.mean([f.score for f in report.per_fold])
        )

    def test_perfect_learner_on_separable_data(self):
        ds = separable_classification(90, seed=5)
        tl = make_tl(max_evals=5, inner=KFoldSpec(2, stratify=True))
        outer = tk.make_kfold(ds.n, 3, y=ds.target, rng=derive(3, "n"))
        report = nested_evaluate(tl, ds, outer, master_seed=6)
        assert report.aggregate == 0.0

    def test_optimism_gap_for_random_labels(self):
        ds = balanced_binary_noise(100, seed=6)
        tl = make_tl("featureless_random", max_evals=60)
        outer = tk.make_kfold(ds.n, 3, rng=derive(4, "n"))
        report = nested_evaluate(tl, ds, outer, master_seed=7)
        assert report.inner_best_mean < report.aggregate  # tuning estimate is optimistic


class TestParallelEquivalence:
    def run_report(self, workers, level):
        ds = overlapping_classification(60, seed=7)
        tl = make_tl(max_evals=6, inner=KFoldSpec(2))
        outer = tk.make_kfold(ds.n, 3, rng=derive(5, "n"))
        report = nested_evaluate(tl, ds, outer, master_seed=8, workers=workers, level=level)
        return [
            (f.score, f.chosen.canonical(), f.inner_archive.to_jsonl()) for f in report.per_fold
        ]

    @pytest.mark.parametrize("level", ["outer", "batch", "config", "fold", "combined"])
    def test_workers_do_not_change_results(self, level):
        sequential = self.run_report(1, level)
        assert self.run_report(4, level) == sequential

    def test_levels_agree(self):
        baseline = self.run_report(1, "config")
        for level in ("outer", "batch", "fold", "combined"):
            assert self.run_report(3, level) == baseline


class TestJobCounts:
    def test_outer_level_spawns_one_job_per_fold(self):
        ds = overlapping_classification(60, seed=8)
        outer = tk.make_kfold(ds.n, 10, rng=derive(6, "j"))
        assert outer.B == 10  # ten outer folds means ten level-(outer) jobs

    def test_combined_level_jobs_equal_batch_times_folds(self):
        ds = overlapping_classification(60, seed=9)
        plan = tk.make_kfold(ds.n, 3, rng=derive(7, "j"))
        knn = get_learner("knn")
        obj = tk.ResampledObjective(knn, knn.space_preset(), ds, plan, "ce", master_seed=9)
        rng = derive(8, "j")
        proposals = [(tk.sample_uniform(obj.space, rng), None) for _ in range(20)]
        obj.evaluate_batch(proposals, workers=4, level="combined")
        assert obj.last_job_count == 60  # 20 offspring x 3 inner folds

    def test_config_level_jobs_equal_batch(self):
        ds = overlapping_classification(60, seed=10)
        plan = tk.make_kfold(ds.n, 3, rng=derive(9, "j"))
        knn = get_learner("knn")
        obj = tk.ResampledObjective(knn, knn.space_preset(), ds, plan, "ce", master_seed=10)
        rng = derive(10, "j")
        proposals = [(tk.sample_uniform(obj.space, rng), None) for _ in range(5)]
        obj.evaluate_batch(proposals, workers=2, level="config")
        assert obj.last_job_count == 5
