import io

import numpy as np
import pytest

import tunekit as tk
from tunekit.data import csv_roundtrip, subsample_indices
from tunekit.errors import DataError
from tunekit.learn import get_learner
from tunekit.rng import derive
from tunekit.synth_data import balanced_binary_noise, noisy_linear_regression


class TestHoldout:
    def test_two_thirds_split(self):
        plan = tk.make_holdout(9, 2.0 / 3.0, rng=derive(0, "h"))
        train, test = plan.splits[0]
        assert len(train) == 6 and len(test) == 3

    def test_stratified_exact_balance(self):
        y = np.asarray([1, 1, 0, 0])
        plan = tk.make_holdout(4, 0.5, y=y, rng=derive(1, "h"))
        train, test = plan.splits[0]
        assert sorted(y[train].tolist()) == [0, 1]
        assert sorted(y[test].tolist()) == [0, 1]

    def test_n_one_rejected(self):
        with pytest.raises(DataError):
            tk.make_holdout(1, 0.5)

    def test_singleton_class_rejected_under_stratification(self):
        with pytest.raises(DataError):
            tk.make_holdout(5, 0.6, y=np.asarray([0, 0, 0, 0, 1]), rng=derive(2, "h"))

    def test_stratified_proportions_within_one(self):
        rng = derive(3, "h")
        y = np.asarray([0] * 30 + [1] * 60 + [2] * 10)
        plan = tk.make_holdout(100, 2.0 / 3.0, y=y, rng=rng)
        train, _ = plan.splits[0]
        for cls, total in ((0, 30), (1, 60), (2, 10)):
            got = int(np.sum(y[train] == cls))
            assert abs(got - total * 2.0 / 3.0) <= 1.0


class TestKFold:
    def test_partition_sizes(self):
        plan = tk.make_kfold(6, 3, rng=derive(0, "k"))
        assert plan.B == 3
        for train, test in plan.splits:
            assert len(test) == 2 and len(train) == 4

    def test_repeats_cover_everything(self):
        plan = tk.make_kfold(6, 3, repeats=2, rng=derive(1, "k"))
        assert plan.B == 6
        for rep in range(2):
            tests = np.concatenate([plan.splits[rep * 3 + j][1] for j in range(3)])
            assert sorted(tests.tolist()) == list(range(6))

    def test_remainder_distribution(self):
        plan = tk.make_kfold(5, 3, rng=derive(2, "k"))
        sizes = sorted(len(te) for _, te in plan.splits)
        assert sizes == [1, 2, 2]

    def test_k_larger_than_n_rejected(self):
        with pytest.raises(DataError):
            tk.make_kfold(3, 4)

    def test_every_index_in_exactly_one_test_fold(self):
        for seed in range(5):
            plan = tk.make_kfold(23, 4, rng=derive(seed, "k"))
            seen = np.concatenate([te for _, te in plan.splits])
            assert sorted(seen.tolist()) == list(range(23))
            for train, test in plan.splits:
                assert not set(train.tolist()) & set(test.tolist())
                assert sorted(set(train.tolist()) | set(test.tolist())) == list(range(23))

    def test_stratified_per_class_within_one(self):
        y = np.asarray(["a"] * 17 + ["b"] * 8)
        plan = tk.make_kfold(25, 4, y=y, rng=derive(3, "k"))
        for _, test in plan.splits:
            for cls, total in (("a", 17), ("b", 8)):
                got = int(np.sum(y[test] == cls))
                assert abs(got - total / 4.0) <= 1.0
        sizes = [len(te) for _, te in plan.splits]
        assert max(sizes) - min(sizes) <= 1


class TestSubsample:
    def test_fraction_and_minimum(self):
        idx = np.arange(40)
        sub = subsample_indices(None, idx, 0.5, derive(0, "s"))
        assert len(sub) == 20
        tiny = subsample_indices(None, np.arange(3), 0.01, derive(1, "s"))
        assert len(tiny) == 2  # floor at two rows

    def test_stratified_keeps_proportions(self):
        y = np.asarray(["a"] * 30 + ["b"] * 10)
        sub = subsample_indices(y, np.arange(40), 0.5, derive(2, "s"))
        labels = y[sub]
        assert abs(int(np.sum(labels == "a")) - 15) <= 1
        assert abs(int(np.sum(labels == "b")) - 5) <= 1


class TestEstimateGE:
    def test_random_classifier_near_half(self):
        ds = balanced_binary_noise(100, seed=0)
        plan = tk.make_kfold(100, 10, rng=derive(0, "e"))
        learner = get_learner("featureless_random")
        est = tk.estimate_ge(learner, {}, ds, plan, "ce", master_seed=5)
        assert abs(est.aggregate - 0.5) < 0.15

    def test_constant_mean_regressor_closed_form(self):
        ds = noisy_linear_regression(60, seed=1)
        plan = tk.make_holdout(60, 2.0 / 3.0, rng=derive(1, "e"))
        learner = get_learner("featureless")
        est = tk.estimate_ge(learner, {}, ds, plan, "mse", master_seed=5)
        train, test = plan.splits[0]
        mean = ds.target[train].mean()
        expected = float(np.mean((ds.target[test] - mean) ** 2))
        assert est.aggregate == pytest.approx(expected, rel=1e-12)

    def test_one_nn_leak_gives_zero_error(self):
        ds = balanced_binary_noise(30, seed=2)
        leak = tk.ResamplingPlan([(np.arange(30), np.arange(10))])  # test inside train
        learner = get_learner("knn")
        est = tk.estimate_ge(
            learner, {"k": 1, "p": 2.0, "kernel": "rectangular"}, ds, leak, "ce", master_seed=0
        )
        assert est.aggregate == 0.0

    def test_per_split_scores_returned(self):
        ds = balanced_binary_noise(40, seed=3)
        plan = tk.make_kfold(40, 4, rng=derive(2, "e"))
        est = tk.estimate_ge(get_learner("featureless_random"), {}, ds, plan, "ce", master_seed=1)
        assert len(est.per_split) == 4
        assert est.aggregate == pytest.approx(np.mean(est.defined_splits))


class TestCSV:
    def make_mixed(self):
        return tk.Dataset(
            feature_names=["num", "cat"],
            feature_types=["numeric", "categorical"],
            columns=[
                np.asarray([1.5, np.nan, -0.25, 3.0]),
                np.asarray(["u", "v", None, "u"], dtype=object),
            ],
            target=np.asarray(["yes", "no", "yes", "no"], dtype=object),
            task="classification",
        )

    def test_roundtrip_mixed(self):
        ds = self.make_mixed()
        back = csv_roundtrip(ds)
        assert back.feature_names == ds.feature_names
        assert back.feature_types == ds.feature_types
        got = np.asarray(back.columns[0], dtype=float)
        assert got[0] == 1.5 and np.isnan(got[1]) and got[2] == -0.25
        assert back.columns[1].tolist() == ["u", "v", None, "u"]
        assert back.target.tolist() == ds.target.tolist()

    def test_roundtrip_regression_exact(self):
        ds = noisy_linear_regression(25, seed=4)
        back = csv_roundtrip(ds)
        for a, b in zip(ds.columns, back.columns):
            assert np.array_equal(a, b)
        assert np.array_equal(ds.target, back.target)

    def test_missing_target_rejected(self):
        text = "x,target\n1.0,\n2.0,b\n"
        with pytest.raises(DataError):
            tk.read_csv(io.StringIO(text), target="target", task="classification")

    def test_unknown_target_column(self):
        with pytest.raises(DataError):
            tk.read_csv(io.StringIO("x,y\n1,2\n"), target="zz", task="regression")


class TestPredictionMatrix:
    def test_probability_rows_checked(self):
        with pytest.raises(DataError):
            tk.PredictionMatrix(np.asarray([[0.7, 0.6]]), probabilities=True, classes=("a", "b"))

    def test_labels_argmax(self):
        pm = tk.PredictionMatrix(
            np.asarray([[0.2, 0.8], [0.9, 0.1]]), probabilities=True, classes=("a", "b")
        )
        assert pm.labels().tolist() == ["b", "a"]
