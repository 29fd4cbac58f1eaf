"""(mu + lambda) evolution strategy for mixed hierarchical spaces.

Individuals carry a full genotype (a value for every spec, including
currently inactive conditional ones); only the active subset is exposed as
the evaluated configuration. Reproduction is tournament selection (size 2),
uniform crossover, then per-gene mutation: Gaussian steps for reals, the
difference of two geometric draws for integers, uniform resampling with
small probability for categoricals. Survival keeps the best mu of parents
plus offspring, ties resolved toward the older individual.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..objective import Archive, ArchiveEntry
from ..space import Config, ParamSpec, SearchSpace, sample_uniform
from .base import Proposal, Tuner


@dataclass
class Individual:
    genotype: dict
    score: float
    index: int  # evaluation index; smaller = older


def _geometric_p(sigma: float) -> float:
    # difference of two geometric draws has variance 2(1-p)/p^2 = sigma^2
    s2 = max(sigma, 1e-6) ** 2
    return min(1.0 - 1e-12, (-1.0 + math.sqrt(1.0 + 2.0 * s2)) / s2)


class ESTuner(Tuner):
    name = "es"

    def __init__(
        self,
        space: SearchSpace,
        seed: int = 0,
        mu: int = 10,
        lam: int = 10,
        p_crossover: float = 0.7,
        sigma_fraction: float = 0.1,
        p_cat_mutation: float = 0.1,
        tournament: int = 2,
    ):
        super().__init__(space, seed)
        self.mu = int(mu)
        self.lam = int(lam)
        self.p_crossover = float(p_crossover)
        self.sigma_fraction = float(sigma_fraction)
        self.p_cat_mutation = float(p_cat_mutation)
        self.tournament = int(tournament)
        self.population: list[Individual] = []
        self._queue: list[dict] = []
        self._pending: list[dict] = []
        self._incoming: list[Individual] = []
        self._init_left = self.mu

    # -- genotype helpers ----------------------------------------------------

    def _random_gene(self, spec: ParamSpec):
        if spec.kind == "real":
            return float(self.rng.uniform(spec.lower, spec.upper))
        if spec.kind == "integer":
            return int(self.rng.integers(spec.int_lower, spec.int_upper + 1))
        return spec.levels[int(self.rng.integers(len(spec.levels)))]

    def _random_genotype(self) -> dict:
        return {s.name: self._random_gene(s) for s in self.space.specs}

    def _genotype_from_config(self, cfg: Config) -> dict:
        return {
            s.name: cfg[s.name] if s.name in cfg else self._random_gene(s)
            for s in self.space.specs
        }

    def _to_config(self, genotype: dict) -> Config:
        return self.space.canonicalize(genotype)

    def _mutate_gene(self, spec: ParamSpec, value):
        if spec.kind == "real":
            sigma = self.sigma_fraction * (spec.upper - spec.lower)
            return float(np.clip(value + self.rng.normal(0.0, sigma), spec.lower, spec.upper))
        if spec.kind == "integer":
            sigma = self.sigma_fraction * (spec.int_upper - spec.int_lower)
            p = _geometric_p(sigma)
            step = int(self.rng.geometric(p)) - int(self.rng.geometric(p))
            return int(np.clip(value + step, spec.int_lower, spec.int_upper))
        if self.rng.random() < self.p_cat_mutation:
            return spec.levels[int(self.rng.integers(len(spec.levels)))]
        return value

    def _tournament_pick(self) -> Individual:
        k = min(self.tournament, len(self.population))
        picks = self.rng.choice(len(self.population), size=k, replace=False)
        best = min(picks.tolist(), key=lambda i: (self.population[i].score, self.population[i].index))
        return self.population[best]

    def _make_child(self) -> dict:
        p1 = self._tournament_pick()
        if self.rng.random() < self.p_crossover:
            p2 = self._tournament_pick()
            child = {
                name: (p1.genotype[name] if self.rng.random() < 0.5 else p2.genotype[name])
                for name in self.space.names
            }
        else:
            child = dict(p1.genotype)
        return {name: self._mutate_gene(self.space[name], child[name]) for name in child}

    # -- tuner contract --------------------------------------------------------

    def warm_start(self, prior: Archive, prior_space: SearchSpace) -> None:
        self._check_prior_space(prior_space)
        ranked = sorted((e for e in prior if not e.failed), key=lambda e: (e.score, e.index))
        seeds = [self._genotype_from_config(e.config) for e in ranked[: self.mu]]
        # the whole first population: prior seeds topped up with uniform draws
        fill = [self._random_genotype() for _ in range(self.mu - len(seeds))]
        self._queue = seeds + fill
        self._init_left = 0

    def propose(self, archive: Archive, n: int) -> list[Proposal]:
        out: list[Proposal] = []
        while len(out) < n:
            if not self._queue:
                if self._pending:
                    break  # wait for the running generation to be observed
                self._queue = self._next_generation()
            g = self._queue.pop(0)
            self._pending.append(g)
            out.append(Proposal(self._to_config(g)))
        return out

    def _next_generation(self) -> list[dict]:
        if self._init_left > 0:
            batch = [self._random_genotype() for _ in range(self._init_left)]
            self._init_left = 0
            return batch
        return [self._make_child() for _ in range(self.lam)]

    def observe(self, entries: list[ArchiveEntry]) -> None:
        for e in entries:
            genotype = self._pending.pop(0)
            self._incoming.append(Individual(genotype, e.score, e.index))
        if not self._pending and not self._queue:
            self._survival()

    def _survival(self) -> None:
        pool = self.population + self._incoming
        self._incoming = []
        pool.sort(key=lambda ind: (ind.score, ind.index))
        self.population = pool[: self.mu]
