import dataclasses
import math

import numpy as np
import pytest

import tunekit as tk
from tunekit.errors import DataError, TunekitError
from tunekit.learn import get_learner
from tunekit.objective import DEFAULT_CRASH_PENALTY, trace
from tunekit.rng import derive
from tunekit.synth_data import balanced_binary_noise, overlapping_classification


def sphere_obj(seed=0, dim=3):
    return tk.synthetic_objective("sphere", master_seed=seed, dim=dim)


def knn_objective(seed=0, fidelity=None, n=60, k=3):
    ds = overlapping_classification(n, seed=1)
    plan = tk.make_kfold(ds.n, k, rng=derive(seed, "plan"))
    learner = get_learner("knn")
    return tk.ResampledObjective(
        learner, learner.space_preset(), ds, plan, "ce", master_seed=seed, fidelity=fidelity
    )


class TestArchive:
    def test_append_only_index_discipline(self):
        obj = sphere_obj()
        obj.evaluate(tk.Config({"x1": 0.0, "x2": 0.0, "x3": 0.0}))
        entry = obj.archive[0]
        bad = dataclasses.replace(entry, index=0)
        with pytest.raises(TunekitError):
            obj.archive.append(bad)

    def test_entries_frozen(self):
        obj = sphere_obj()
        e = obj.evaluate(tk.Config({"x1": 1.0, "x2": 0.0, "x3": 0.0}))
        with pytest.raises(dataclasses.FrozenInstanceError):
            e.score = 0.0

    def test_jsonl_roundtrip(self):
        obj = sphere_obj()
        rng = derive(0, "a")
        for _ in range(5):
            obj.evaluate(tk.sample_uniform(obj.space, rng))
        text = obj.archive.to_jsonl()
        back = tk.Archive.from_jsonl(text)
        assert len(back) == 5
        assert back.to_jsonl() == text

    def test_csv_rows_match(self):
        obj = sphere_obj()
        rng = derive(1, "a")
        for _ in range(4):
            obj.evaluate(tk.sample_uniform(obj.space, rng))
        csv_text = obj.archive.to_csv().strip().splitlines()
        assert len(csv_text) - 1 == 4


class TestEvaluate:
    def test_sphere_minimum(self):
        obj = sphere_obj()
        e = obj.evaluate(tk.Config({"x1": 0.0, "x2": 0.0, "x3": 0.0}))
        assert e.score == 0.0

    def test_low_effective_dim_ignores_other_coords(self):
        obj = tk.synthetic_objective("low_effective_dim", master_seed=0, dim=2)
        a = obj.evaluate(tk.Config({"x1": 0.3, "x2": 0.1}))
        b = obj.evaluate(tk.Config({"x1": 0.3, "x2": 0.9}))
        assert a.score == b.score

    def test_random_classifier_per_split_scores(self):
        ds = balanced_binary_noise(60, seed=2)
        plan = tk.make_kfold(60, 3, rng=derive(0, "p"))
        learner = get_learner("featureless_random")
        obj = tk.ResampledObjective(learner, learner.space_preset(), ds, plan, "ce", master_seed=3)
        e = obj.evaluate(tk.Config({"dummy": 0.5}))
        assert len(e.per_split) == 3
        assert all(0.0 <= s <= 1.0 for s in e.per_split)
        assert abs(e.raw_score - 0.5) < 0.35

    def test_fidelity_half_trains_on_half(self):
        obj = knn_objective(fidelity=tk.FidelitySpec(lower=1, upper=8))
        captured = []
        orig = obj.learner.train

        def spy(data, params, rng):
            captured.append(data.n)
            return orig(data, params, rng)

        obj.learner.train = spy
        cfg = tk.Config({"k": 0.5, "p": 2.0, "kernel": "rectangular"})
        obj.evaluate(cfg, fidelity=4)
        full = [len(tr) for tr, _ in obj.plan.splits]
        assert captured == [math.floor(0.5 * n) for n in full]
        obj.learner.train = orig

    def test_fidelity_out_of_bounds_rejected(self):
        obj = knn_objective(fidelity=tk.FidelitySpec(lower=1, upper=8))
        with pytest.raises(DataError):
            obj.evaluate(tk.Config({"k": 0.5, "p": 2.0, "kernel": "rectangular"}), fidelity=9)

    def test_direction_normalization_negates_max_metrics(self):
        ds = overlapping_classification(60, seed=3)
        plan = tk.make_kfold(60, 3, rng=derive(1, "p"))
        learner = get_learner("knn")
        obj = tk.ResampledObjective(learner, learner.space_preset(), ds, plan, "acc", master_seed=0)
        cfg = tk.Config({"k": 1.5, "p": 2.0, "kernel": "rectangular"})
        e = obj.evaluate(cfg)
        assert e.score == -e.raw_score
        assert e.raw_score >= 0.5

    def test_invalid_config_rejected(self):
        obj = sphere_obj()
        with pytest.raises(DataError):
            obj.evaluate(tk.Config({"x1": 99.0, "x2": 0.0, "x3": 0.0}))

    def test_failure_records_sentinel_and_flag(self):
        obj = knn_objective()
        good = tk.Config({"k": 0.5, "p": 2.0, "kernel": "rectangular"})
        obj.evaluate(good)
        bad = tk.Config({"k": math.log(50), "p": 2.0, "kernel": "rectangular"})  # k=50 > n_train
        e = obj.evaluate(bad)
        assert e.failed and e.raw_score is None
        worst = max(x.score for x in obj.archive if not x.failed)
        assert e.score == pytest.approx(worst + 1.0)

    def test_failure_with_empty_archive_uses_penalty(self):
        obj = knn_objective()
        bad = tk.Config({"k": math.log(50), "p": 2.0, "kernel": "rectangular"})
        e = obj.evaluate(bad)
        assert e.failed and e.score == DEFAULT_CRASH_PENALTY


class TestIncumbent:
    def test_tie_goes_to_earliest(self):
        obj = sphere_obj(dim=2)

        def at(v):
            return tk.Config({"x1": v, "x2": 0.0})

        obj.evaluate(at(2.0))   # 4.0
        obj.evaluate(at(1.0))   # 1.0
        obj.evaluate(at(-1.0))  # 1.0 tie
        best = tk.incumbent(obj.archive)
        assert best.index == 1

    def test_failed_entries_skipped(self):
        obj = knn_objective()
        bad = tk.Config({"k": math.log(50), "p": 2.0, "kernel": "rectangular"})
        obj.evaluate(bad)
        good = tk.Config({"k": 0.5, "p": 2.0, "kernel": "rectangular"})
        obj.evaluate(good)
        assert tk.incumbent(obj.archive).index == 1

    def test_all_failed_raises(self):
        obj = knn_objective()
        bad = tk.Config({"k": math.log(50), "p": 2.0, "kernel": "rectangular"})
        obj.evaluate(bad)
        with pytest.raises(TunekitError):
            tk.incumbent(obj.archive)

    def test_single_entry(self):
        obj = sphere_obj(dim=2)
        e = obj.evaluate(tk.Config({"x1": 0.5, "x2": 0.5}))
        assert tk.incumbent(obj.archive) is e


class TestTrace:
    def test_running_minimum(self):
        obj = sphere_obj(dim=1 + 1)
        for v in (math.sqrt(3), 1.0, math.sqrt(2)):
            obj.evaluate(tk.Config({"x1": v, "x2": 0.0}))
        best = [p.best_score for p in trace(obj.archive)]
        assert best == pytest.approx([3.0, 1.0, 1.0])

    def test_empty_archive_empty_trace(self):
        assert trace(tk.Archive()) == []

    def test_cumulative_fidelity_prefix_sum(self):
        obj = knn_objective(fidelity=tk.FidelitySpec(lower=1, upper=8))
        cfg = tk.Config({"k": 0.5, "p": 2.0, "kernel": "rectangular"})
        for f in (1, 2, 4):
            obj.evaluate(cfg, fidelity=f)
        cums = [p.cumulative_fidelity for p in trace(obj.archive)]
        assert cums == [1.0, 3.0, 7.0]


class TestReproducibility:
    def run_archive(self, workers, level):
        obj = knn_objective(seed=42)
        rng = derive(9, "cfgs")
        proposals = [(tk.sample_uniform(obj.space, rng), None) for _ in range(6)]
        obj.evaluate_batch(proposals, proposer="t", workers=workers, level=level)
        return obj.archive.to_jsonl()

    @pytest.mark.parametrize("level", ["config", "batch", "fold", "combined"])
    def test_bit_identical_across_worker_counts(self, level):
        base = self.run_archive(1, level)
        assert self.run_archive(4, level) == base
        assert self.run_archive(8, level) == base

    def test_levels_agree_with_each_other(self):
        texts = {level: self.run_archive(3, level) for level in ("config", "batch", "fold", "combined")}
        assert len(set(texts.values())) == 1

    def test_noise_stream_tied_to_eval_index(self):
        a = tk.synthetic_objective("sphere", master_seed=5, dim=2, noise_sd=1.0)
        b = tk.synthetic_objective("sphere", master_seed=5, dim=2, noise_sd=1.0)
        cfg = tk.Config({"x1": 1.0, "x2": 1.0})
        assert a.evaluate(cfg).score == b.evaluate(cfg).score
        assert a.evaluate(cfg).score == b.evaluate(cfg).score
        assert a.archive[0].score != a.archive[1].score


class TestSyntheticFunctions:
    def test_reference_optima(self):
        assert tk.make_synthetic("sphere", 2).reference_optimum() == pytest.approx(0.0, abs=1e-6)
        assert tk.make_synthetic("branin").reference_optimum() == pytest.approx(0.397887, abs=1e-4)
        assert tk.make_synthetic("low_effective_dim", 2).reference_optimum() == pytest.approx(0.0, abs=1e-8)

    def test_unknown_id(self):
        with pytest.raises(DataError):
            tk.make_synthetic("nope")
