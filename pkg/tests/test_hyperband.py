from fractions import Fraction

import numpy as np
import pytest

import tunekit as tk
from tunekit.errors import TunekitError
from tunekit.learn import get_learner
from tunekit.rng import derive
from tunekit.synth_data import overlapping_classification
from tunekit.tuners import (
    HyperbandTuner,
    TerminationStack,
    budget_bound,
    fidelity_ladder,
    hyperband_run,
    hyperband_schedule,
    max_exploration_level,
    run_tuning,
    sh_bracket,
)


class TestSchedule:
    def test_eta2_upp8_four_brackets(self):
        brackets = hyperband_schedule(2, 8)
        assert [b.s for b in brackets] == [3, 2, 1, 0]
        assert [b.p0 for b in brackets] == [8, 6, 4, 4]

    def test_eta2_upp8_stage_design(self):
        brackets = {b.s: b for b in hyperband_schedule(2, 8)}
        design = {
            3: [(8, 1), (4, 2), (2, 4), (1, 8)],
            2: [(6, 2), (3, 4), (1, 8)],
            1: [(4, 4), (2, 8)],
            0: [(4, 8)],
        }
        for s, expected in design.items():
            got = [(st.n_configs, float(st.fidelity)) for st in brackets[s].stages]
            assert got == [(n, float(f)) for n, f in expected]

    def test_last_bracket_is_plain_full_fidelity_search(self):
        bracket = hyperband_schedule(2, 8)[-1]
        assert bracket.s == 0
        assert len(bracket.stages) == 1
        assert float(bracket.stages[0].fidelity) == 8.0

    @pytest.mark.parametrize("eta", [2, 3])
    @pytest.mark.parametrize("upp", [8, 9, 27, 81])
    def test_budget_law_exact(self, eta, upp):
        B = budget_bound(eta, upp)
        for bracket in hyperband_schedule(eta, upp):
            # exact rational arithmetic: sum of floor(p eta^-t) * fid <= B
            spend = Fraction(0)
            for t, stage in enumerate(bracket.stages):
                expected_n = int(Fraction(bracket.p0) / Fraction(eta) ** t)
                assert stage.n_configs == expected_n
                spend += stage.n_configs * stage.fidelity
            assert spend <= B

    def test_ladder_starts_at_or_above_one(self):
        for eta, upp in [(2, 8), (2, 9), (3, 27), (3, 81), (2, 81)]:
            ladder = fidelity_ladder(eta, upp)
            assert ladder[0] >= 1
            assert ladder[-1] == upp
            s_max = max_exploration_level(eta, upp)
            assert len(ladder) == s_max + 1

    def test_precondition_checked(self):
        with pytest.raises(TunekitError):
            hyperband_schedule(2, 2)  # needs upp > eta
        with pytest.raises(TunekitError):
            hyperband_schedule(1, 8)

    def test_survivor_counts_floor_rule(self):
        for bracket in hyperband_schedule(3, 27):
            for stage in bracket.stages:
                assert stage.keep == stage.n_configs // 3


class TestRun:
    def make_objective(self, seed=0, upp=8):
        ds = overlapping_classification(80, seed=1)
        plan = tk.make_kfold(ds.n, 3, rng=derive(seed, "p"))
        knn = get_learner("knn")
        return tk.ResampledObjective(
            knn, knn.space_preset(), ds, plan, "ce", master_seed=seed,
            fidelity=tk.FidelitySpec(lower=1, upper=upp),
        )

    def test_run_produces_schedule_evaluation_count(self):
        obj = self.make_objective()
        archive = hyperband_run(obj, eta=2, seed=0)
        expected = sum(st.n_configs for b in hyperband_schedule(2, 8) for st in b.stages)
        assert len(archive) == expected
        assert all(e.fidelity is not None for e in archive)

    def test_survivors_are_stage_subsets_with_exact_counts(self):
        obj = self.make_objective(seed=1)
        tuner = HyperbandTuner(obj.space, seed=1, eta=2, fid_upper=8)
        stage_log = []
        while not tuner.exhausted():
            cur_bracket, cur_stage = tuner._current()
            props = tuner.propose(obj.archive, 10**9)
            entries = obj.evaluate_batch([(p.config, p.fidelity) for p in props], proposer="hb")
            stage_log.append((cur_bracket.s, cur_stage.t, [e.config for e in entries],
                              sorted(entries, key=lambda e: (e.score, e.index))))
            tuner.observe(entries)
        # check every consecutive stage within a bracket
        for (s1, t1, cfgs1, ranked1), (s2, t2, cfgs2, _) in zip(stage_log, stage_log[1:]):
            if s1 == s2 and t2 == t1 + 1:
                keep = len(cfgs2)
                expected = [e.config for e in ranked1[:keep]]
                assert cfgs2 == expected
                assert keep == len(cfgs1) // 2

    def test_fidelity_maps_to_training_fraction(self):
        obj = self.make_objective(seed=2, upp=8)
        sizes = []
        orig = obj.learner.train

        def spy(data, params, rng):
            sizes.append(data.n)
            return orig(data, params, rng)

        obj.learner.train = spy
        cfg = tk.Config({"k": 0.5, "p": 2.0, "kernel": "rectangular"})
        obj.evaluate(cfg, fidelity=2)  # quarter of max fidelity
        full = [len(tr) for tr, _ in obj.plan.splits]
        assert sizes == [int(np.floor(0.25 * n)) for n in full]
        obj.learner.train = orig

    def test_run_through_generic_driver_with_budget(self):
        obj = self.make_objective(seed=3)
        tuner = HyperbandTuner(obj.space, seed=3, eta=2, fid_upper=8)
        result = run_tuning(obj, tuner, TerminationStack(max_evals=10), n_batch=4)
        assert len(obj.archive) == 10
        assert result.stop_reason == "max_evals"

    def test_requires_fidelity_semantics(self):
        obj = tk.synthetic_objective("sphere", master_seed=0, dim=2)
        with pytest.raises(TunekitError):
            hyperband_run(obj, eta=2)
