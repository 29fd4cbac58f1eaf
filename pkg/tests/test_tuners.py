import math

import numpy as np
import pytest

import tunekit as tk
from tunekit.errors import WarmStartError
from tunekit.rng import derive
from tunekit.space import encode_numeric
from tunekit.tuners import (
    BOTuner,
    ESTuner,
    GridTuner,
    RandomTuner,
    TerminationStack,
    run_tuning,
    should_stop,
)
from tunekit.tuners.es import _geometric_p


def box_space(dim=2):
    return tk.SearchSpace(
        [tk.ParamSpec(f"x{i + 1}", "real", lower=0.0, upper=1.0) for i in range(dim)]
    )


def mixed_space():
    return tk.SearchSpace(
        [
            tk.ParamSpec("a", "categorical", levels=("u", "v")),
            tk.ParamSpec("b", "integer", lower=1, upper=50),
            tk.ParamSpec("c", "real", lower=-2.0, upper=2.0, trafo="pow10",
                         condition=tk.Condition("a", ("u",))),
        ]
    )


def run_sphere(tuner_cls_factory, seed, max_evals, dim=3, n_batch=1):
    obj = tk.synthetic_objective("sphere", master_seed=seed, dim=dim)
    tuner = tuner_cls_factory(obj.space, seed)
    result = run_tuning(obj, tuner, TerminationStack(max_evals=max_evals), n_batch=n_batch)
    return obj, result


class TestRandomAndGrid:
    def test_rs_continuous_proposals_distinct(self):
        space = box_space(1)
        tuner = RandomTuner(space, seed=0)
        props = tuner.propose(tk.Archive(), 9)
        values = [p.config["x1"] for p in props]
        assert len(set(values)) == 9

    def test_grid_exhaustion_after_resolution_squared(self):
        space = box_space(2)
        tuner = GridTuner(space, resolution=3, seed=0)
        got = tuner.propose(tk.Archive(), 100)
        assert len(got) == 9
        assert tuner.exhausted()
        assert tuner.propose(tk.Archive(), 5) == []

    def test_grid_driver_stops_on_exhaustion(self):
        obj = tk.synthetic_objective("sphere", master_seed=1, dim=2)
        tuner = GridTuner(obj.space, resolution=3, seed=1)
        result = run_tuning(obj, tuner, TerminationStack(max_evals=100))
        assert len(obj.archive) == 9
        assert result.stop_reason == "exhausted"

    def test_all_proposals_validate_fuzz(self):
        space = mixed_space()
        archive = tk.Archive()
        for seed in range(10):
            for tuner in (RandomTuner(space, seed=seed), GridTuner(space, 3, seed=seed)):
                for p in tuner.propose(archive, 20):
                    assert tk.validate(space, p.config).ok


class TestES:
    def test_elitist_survival_best_four_of_eight_ties_older(self):
        space = box_space(1)
        tuner = ESTuner(space, seed=0, mu=4, lam=4)
        obj = tk.synthetic_objective("sphere", master_seed=0, dim=1 + 0)

        # drive manually: init generation
        props = tuner.propose(obj.archive, 4)
        entries = [obj.evaluate(p.config, proposer="es") for p in props]
        tuner.observe(entries)
        assert len(tuner.population) == 4
        props = tuner.propose(obj.archive, 4)
        entries2 = [obj.evaluate(p.config, proposer="es") for p in props]
        tuner.observe(entries2)
        pool = entries + entries2
        expected = sorted(pool, key=lambda e: (e.score, e.index))[:4]
        got = sorted((ind.score, ind.index) for ind in tuner.population)
        assert got == sorted((e.score, e.index) for e in expected)

    def test_mutation_respects_bounds(self):
        from tunekit.objective import ArchiveEntry

        space = mixed_space()
        tuner = ESTuner(space, seed=3, mu=5, lam=5)
        archive = tk.Archive()
        index = 0

        def observe(proposals):
            nonlocal index
            entries = []
            for p in proposals:
                entries.append(
                    ArchiveEntry(index, p.config, None, float(index % 7), float(index % 7),
                                 (), False, None, 0.0, "es")
                )
                index += 1
            tuner.observe(entries)

        observe(tuner.propose(archive, 5))
        for _ in range(20):
            props = tuner.propose(archive, 5)
            for p in props:
                assert tk.validate(space, p.config).ok
                b = p.config["b"]
                assert 1 <= b <= 50 and isinstance(b, int)
            observe(props)

    def test_geometric_step_variance_matches_sigma(self):
        rng = derive(0, "g")
        sigma = 5.0
        p = _geometric_p(sigma)
        draws = rng.geometric(p, size=200_000) - rng.geometric(p, size=200_000)
        assert np.std(draws) == pytest.approx(sigma, rel=0.02)

    def test_es_beats_random_on_sphere(self):
        wins = 0
        seeds = range(20)
        for seed in seeds:
            obj_es, res_es = run_sphere(
                lambda s, seed: ESTuner(s, seed=seed, mu=10, lam=10), seed, 200, n_batch=10
            )
            obj_rs, res_rs = run_sphere(
                lambda s, seed: RandomTuner(s, seed=seed), seed, 200
            )
            if res_es.best.score < res_rs.best.score:
                wins += 1
        assert wins >= 12  # 60 percent of 20 paired seeds


class TestBO:
    def test_bootstrap_phase_is_uniform(self):
        space = box_space(2)
        tuner = BOTuner(space, seed=0)
        props = tuner.propose(tk.Archive(), 4)
        assert len(props) == 4
        assert tuner.last_max_ei is None  # no surrogate yet

    def test_batch_qlcb_distinct_proposals(self):
        obj = tk.synthetic_objective("sphere", master_seed=2, dim=2)
        rng = derive(2, "seed")
        for _ in range(8):  # fill the initial design
            obj.evaluate(tk.sample_uniform(obj.space, rng))
        tuner = BOTuner(obj.space, seed=2, n_candidates=200, refine_steps=5, gp_restarts=2)
        props = tuner.propose(obj.archive, 3)
        assert len(props) == 3
        encs = [tuple(encode_numeric(obj.space, p.config)) for p in props]
        assert len(set(encs)) == 3

    def test_duplicate_proposal_replaced(self):
        space = box_space(1)
        obj = tk.synthetic_objective("sphere", master_seed=3, dim=1 + 0)

        class PinnedBO(BOTuner):
            def _maximize(self, gp, utility_fn, pool):
                return tk.Config({"x1": 0.25}), 1.0  # always collides

        rng = derive(3, "seed")
        for _ in range(4):
            obj.evaluate(tk.sample_uniform(obj.space, rng))
        obj.evaluate(tk.Config({"x1": 0.25}))
        tuner = PinnedBO(obj.space, seed=3, n_candidates=50, gp_restarts=1)
        props = tuner.propose(obj.archive, 1)
        assert props[0].config["x1"] != 0.25

    def test_proposals_validate_on_mixed_space(self):
        space = mixed_space()
        obj_rng = derive(4, "seed")
        archive = tk.Archive()
        from tunekit.objective import ArchiveEntry

        for i in range(14):
            cfg = tk.sample_uniform(space, obj_rng)
            archive.append(ArchiveEntry(i, cfg, None, float(i % 5), float(i % 5), (), False, None, 0.0, "x"))
        tuner = BOTuner(space, seed=4, n_candidates=100, refine_steps=3, gp_restarts=2)
        for p in tuner.propose(archive, 2):
            assert tk.validate(space, p.config).ok


class TestWarmStart:
    def prior_archive(self, space, n=20, seed=0):
        # low_effective_dim lives on the same unit box as box_space()
        obj = tk.synthetic_objective("low_effective_dim", master_seed=seed, dim=space.dim)
        rng = derive(seed, "w")
        for _ in range(n):
            obj.evaluate(tk.sample_uniform(obj.space, rng))
        return obj.archive

    def test_bo_skips_bootstrap_with_enough_priors(self):
        space = box_space(2)  # init design 8
        prior = self.prior_archive(space, n=20)
        tuner = BOTuner(space, seed=1, n_candidates=100, refine_steps=3, gp_restarts=2)
        tuner.warm_start(prior, space)
        tuner.propose(tk.Archive(), 1)
        assert tuner.last_max_ei is not None  # surrogate was fitted, not uniform draws

    def test_es_tops_up_with_uniform(self):
        space = box_space(2)
        prior = self.prior_archive(space, n=3)
        tuner = ESTuner(space, seed=2, mu=6, lam=6)
        tuner.warm_start(prior, space)
        props = tuner.propose(tk.Archive(), 12)
        assert len(props) == 6  # first generation only: 3 seeds + 3 uniform
        best_prior = min((e for e in prior if not e.failed), key=lambda e: e.score)
        assert props[0].config == best_prior.config

    def test_random_prepends_prior_incumbents(self):
        space = box_space(2)
        prior = self.prior_archive(space, n=5)
        tuner = RandomTuner(space, seed=3)
        tuner.warm_start(prior, space)
        props = tuner.propose(tk.Archive(), 3)
        ranked = sorted((e for e in prior), key=lambda e: (e.score, e.index))
        assert props[0].config == ranked[0].config
        assert props[1].config == ranked[1].config

    def test_incompatible_space_rejected(self):
        space = box_space(2)
        other = tk.SearchSpace([tk.ParamSpec("x1", "real", lower=0.0, upper=2.0),
                                tk.ParamSpec("x2", "real", lower=0.0, upper=1.0)])
        prior = self.prior_archive(space, n=5)
        tuner = RandomTuner(other, seed=4)
        with pytest.raises(WarmStartError):
            tuner.warm_start(prior, space)


class TestTermination:
    def filled_archive(self, scores):
        archive = tk.Archive()
        from tunekit.objective import ArchiveEntry

        for i, s in enumerate(scores):
            archive.append(
                ArchiveEntry(i, tk.Config({"x": i}), None, s, s, (s,), False, None, 0.0, "t")
            )
        return archive

    def test_hard_budget_required(self):
        with pytest.raises(Exception):
            TerminationStack()

    def test_max_evals_fires(self):
        stack = TerminationStack(max_evals=10)
        stop, reason = should_stop(stack, self.filled_archive([1.0] * 10))
        assert stop and reason == "max_evals"

    def test_stagnation_fires_after_window(self):
        stack = TerminationStack(max_evals=100, stagnation=(5, 1e-3))
        flat = self.filled_archive([1.0] * 6)
        stop, reason = should_stop(stack, flat)
        assert stop and reason == "stagnation"
        improving = self.filled_archive([1.0, 0.8, 0.6, 0.4, 0.2, 0.1])
        assert not should_stop(stack, improving)[0]

    def test_target_score(self):
        stack = TerminationStack(max_evals=100, target_score=0.5)
        stop, reason = should_stop(stack, self.filled_archive([2.0, 0.4]))
        assert stop and reason == "target_score"

    def test_ei_threshold(self):
        stack = TerminationStack(max_evals=100, ei_threshold=1e-6)
        stop, reason = should_stop(stack, self.filled_archive([1.0]), ei_max=1e-7)
        assert stop and reason == "ei_threshold"
        assert not should_stop(stack, self.filled_archive([1.0]), ei_max=1e-3)[0]

    def test_max_fidelity(self):
        stack = TerminationStack(max_fidelity=3.0)
        archive = tk.Archive()
        from tunekit.objective import ArchiveEntry

        for i, f in enumerate((1.0, 2.5)):
            archive.append(ArchiveEntry(i, tk.Config({"x": i}), f, 1.0, 1.0, (), False, None, 0.0, "t"))
        stop, reason = should_stop(stack, archive)
        assert stop and reason == "max_fidelity"


class TestDeterminism:
    @pytest.mark.parametrize("factory", [
        lambda s, seed: RandomTuner(s, seed=seed),
        lambda s, seed: GridTuner(s, 3, seed=seed),
        lambda s, seed: ESTuner(s, seed=seed, mu=4, lam=4),
        lambda s, seed: BOTuner(s, seed=seed, n_candidates=60, refine_steps=2,
                                gp_restarts=1, init_design=5),
    ])
    def test_replays_bit_identically(self, factory):
        def one(seed):
            obj = tk.synthetic_objective("sphere", master_seed=seed, dim=2)
            run_tuning(obj, factory(obj.space, seed), TerminationStack(max_evals=12))
            return obj.archive.to_jsonl()

        assert one(7) == one(7)
