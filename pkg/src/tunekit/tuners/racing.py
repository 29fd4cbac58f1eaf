"""Racing: fold-wise evaluation with statistical elimination, and iterated
racing over a search space.

A race evaluates every surviving candidate fold by fold. Once ``t_first``
folds are in (and then after every ``t_each`` further folds), each survivor
is compared against the current best by a paired test across the shared
folds; candidates rejected at level ``alpha`` in the worse direction are
dropped. With three or more survivors a Friedman test with a Conover-style
post hoc can replace the pairwise t-test.

Iterated racing runs a default of floor(2 + log2(dim)) races. The first race
starts from uniform samples; later races sample parents among the previous
survivors with probabilities 2(N - r + 1) / (N (N + 1)) for rank r and
mutate them with truncated normal kernels whose scale shrinks race by race.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import stats

from ..errors import TunekitError
from ..objective import Archive, Objective
from ..space import Config, ParamSpec, SearchSpace, sample_uniform


def paired_t_worse(candidate: np.ndarray, best: np.ndarray) -> tuple[float, float]:
    """Paired t statistic and two-sided p for candidate vs best (shared folds).

    A zero-variance difference vector gets p = 0 when the means differ and
    p = 1 when they coincide.
    """
    d = np.asarray(candidate, dtype=float) - np.asarray(best, dtype=float)
    n = len(d)
    if n < 2:
        return 0.0, 1.0
    sd = float(np.std(d, ddof=1))
    mean = float(np.mean(d))
    if sd == 0.0:
        return (math.inf if mean > 0 else -math.inf if mean < 0 else 0.0), (
            1.0 if mean == 0.0 else 0.0
        )
    t = mean / (sd / math.sqrt(n))
    p = 2.0 * float(stats.t.sf(abs(t), n - 1))
    return t, p


def _t_test_eliminate(scores: np.ndarray, alive: list[int], alpha: float) -> list[int]:
    means = {i: float(np.mean(scores[i])) for i in alive}
    best = min(alive, key=lambda i: (means[i], i))
    dropped = []
    for i in alive:
        if i == best:
            continue
        t, p = paired_t_worse(scores[i], scores[best])
        if means[i] > means[best] and p < alpha:
            dropped.append(i)
    return dropped


def _friedman_eliminate(scores: np.ndarray, alive: list[int], alpha: float) -> list[int]:
    """Friedman test, then Conover-style pairwise elimination against the best."""
    m = len(alive)
    T = scores.shape[1]
    block = np.stack([scores[i] for i in alive])  # m x T
    ranks = np.apply_along_axis(stats.rankdata, 0, block)
    R = ranks.sum(axis=1)
    try:
        _, p_global = stats.friedmanchisquare(*[block[j] for j in range(m)])
    except ValueError:
        return []
    if not (p_global < alpha):
        return []
    A1 = float(np.sum(ranks**2))
    B1 = float(np.sum(R**2)) / T
    df = (T - 1) * (m - 1)
    spread = 2.0 * T * (A1 - B1) / df if df > 0 else 0.0
    cd = stats.t.ppf(1.0 - alpha / 2.0, df) * math.sqrt(max(spread, 0.0))
    best_pos = int(np.argmin(R))
    dropped = []
    for j in range(m):
        if j == best_pos:
            continue
        if R[j] - R[best_pos] > cd:
            dropped.append(alive[j])
    return dropped


@dataclass
class RaceResult:
    """Survivor ranking plus the fold-score matrix accumulated by the race."""

    ranked: list[int]  # surviving slots, best mean first
    means: dict[int, float]
    scores: np.ndarray  # n_configs x folds_used, NaN once a slot is eliminated
    eliminated_at: dict[int, int]  # slot -> number of folds it consumed
    folds_used: int


def race(
    eval_fold: Callable[[int, int], float],
    n_configs: int,
    n_folds: int,
    t_first: int = 5,
    t_each: int = 1,
    alpha: float = 0.05,
    test: str = "t",
    n_min: int = 1,
) -> RaceResult:
    """Race ``n_configs`` slots across up to ``n_folds`` instances.

    ``eval_fold(slot, fold)`` returns the minimization score of one slot on
    one fold. The race stops when folds run out or at most ``n_min``
    survivors remain.
    """
    if n_configs < 2:
        raise TunekitError("racing needs at least two configurations")
    if n_folds < t_first:
        raise TunekitError(f"race needs >= t_first={t_first} folds, got {n_folds}")
    if test not in ("t", "friedman"):
        raise TunekitError(f"unknown race test {test!r}")
    scores = np.full((n_configs, n_folds), np.nan)
    alive = list(range(n_configs))
    eliminated_at: dict[int, int] = {}
    folds_used = 0
    for fold in range(n_folds):
        for slot in alive:
            scores[slot, fold] = eval_fold(slot, fold)
        folds_used = fold + 1
        ready = folds_used >= t_first and (folds_used - t_first) % t_each == 0
        if ready and len(alive) > n_min and folds_used >= 2:
            shared = scores[:, :folds_used]
            if test == "friedman" and len(alive) >= 3:
                dropped = _friedman_eliminate(shared, alive, alpha)
            else:
                dropped = _t_test_eliminate(shared, alive, alpha)
            for slot in dropped:
                if len(alive) <= n_min:
                    break
                alive.remove(slot)
                eliminated_at[slot] = folds_used
        if len(alive) <= n_min:
            break
    means = {i: float(np.nanmean(scores[i, :folds_used])) for i in range(n_configs)}
    ranked = sorted(alive, key=lambda i: (means[i], i))
    return RaceResult(ranked, means, scores[:, :folds_used], eliminated_at, folds_used)


def parent_probabilities(n_elite: int) -> np.ndarray:
    """Rank-based parent distribution: p_r = 2 (N - r + 1) / (N (N + 1))."""
    r = np.arange(1, n_elite + 1, dtype=float)
    return 2.0 * (n_elite - r + 1.0) / (n_elite * (n_elite + 1.0))


def truncated_normal(
    lower: float, upper: float, center: float, sd: float, rng: np.random.Generator
) -> float:
    a = (lower - center) / sd
    b = (upper - center) / sd
    return float(stats.truncnorm.rvs(a, b, loc=center, scale=sd, random_state=rng))


@dataclass
class IRaceConfig:
    n_iter: int | None = None  # default floor(2 + log2(dim))
    t_first: int = 4
    t_each: int = 1
    alpha: float = 0.05
    test: str = "t"
    elitist: bool = True
    n_min: int = 2
    sd_start_fraction: float = 0.5  # of the parameter range
    sd_decay: float = 0.7  # applied after each race
    cat_shift: float = 0.3  # extra parent-level mass added per race


@dataclass
class IRaceResult:
    archive: Archive
    elites: list[tuple[Config, float]]  # ranked survivors of the final race
    races: list[RaceResult] = field(default_factory=list)


def default_race_count(dim: int) -> int:
    return int(math.floor(2 + math.log2(max(dim, 1))))


class _Sampler:
    """Parent-centered mutation kernel, narrowed after every race."""

    def __init__(self, space: SearchSpace, cfg: IRaceConfig, rng: np.random.Generator):
        self.space = space
        self.cfg = cfg
        self.rng = rng

    def child(self, parent: Config, race_index: int) -> Config:
        decay = self.cfg.sd_decay ** max(race_index - 2, 0)
        shift = min(0.9, self.cfg.cat_shift * (race_index - 1))
        values: dict = {}
        for name in self.space._topo:
            spec = self.space[name]
            if not self.space.is_active(name, values):
                continue
            if name not in parent:
                # inactive in the parent: fall back to the uniform prior
                values[name] = self._uniform_gene(spec)
            elif spec.kind == "real":
                sd = self.cfg.sd_start_fraction * (spec.upper - spec.lower) * decay
                values[name] = truncated_normal(spec.lower, spec.upper, parent[name], sd, self.rng)
            elif spec.kind == "integer":
                lo, hi = spec.int_lower, spec.int_upper
                sd = max(self.cfg.sd_start_fraction * (hi - lo) * decay, 1e-6)
                draw = truncated_normal(lo - 0.49, hi + 0.49, float(parent[name]), sd, self.rng)
                values[name] = int(np.clip(round(draw), lo, hi))
            else:
                levels = spec.levels
                if self.rng.random() < shift:
                    values[name] = parent[name]
                else:
                    values[name] = levels[int(self.rng.integers(len(levels)))]
        return Config({n: values[n] for n in self.space.names if n in values})

    def _uniform_gene(self, spec: ParamSpec):
        if spec.kind == "real":
            return float(self.rng.uniform(spec.lower, spec.upper))
        if spec.kind == "integer":
            return int(self.rng.integers(spec.int_lower, spec.int_upper + 1))
        return spec.levels[int(self.rng.integers(len(spec.levels)))]


def irace_run(
    objective: Objective,
    budget: int,
    seed: int = 0,
    config: IRaceConfig | None = None,
    n_instances: int | None = None,
) -> IRaceResult:
    """Iterated racing against an objective's resampling folds.

    ``budget`` counts fold evaluations and is split evenly across races. The
    race population is sized so a race cannot exceed its share even if no
    candidate is eliminated.
    """
    from ..rng import derive

    cfg = config or IRaceConfig()
    space = objective.space
    n_iter = cfg.n_iter or default_race_count(space.dim)
    folds = n_instances if n_instances is not None else objective.n_folds
    if folds > 10**6:
        folds = 10  # synthetic objectives: treat noisy draws as 10 instances
    folds = max(folds, cfg.t_first)
    min_race_cost = (cfg.n_min + 1) * cfg.t_first
    if budget < n_iter * min_race_cost:
        raise TunekitError(
            f"budget {budget} below {n_iter} races x minimal cost {min_race_cost}"
        )
    rng = derive(seed, "irace")
    sampler = _Sampler(space, cfg, rng)
    per_race = budget // n_iter
    elites: list[tuple[Config, float]] = []
    races: list[RaceResult] = []
    for r in range(1, n_iter + 1):
        pop_size = max(cfg.n_min + 1, per_race // folds)
        candidates: list[Config] = []
        if cfg.elitist and elites:
            candidates.extend(c for c, _ in elites[: pop_size - 1])
        while len(candidates) < pop_size:
            if elites:
                probs = parent_probabilities(len(elites))
                pick = int(rng.choice(len(elites), p=probs))
                candidates.append(sampler.child(elites[pick][0], r))
            else:
                candidates.append(sample_uniform(space, rng))

        def eval_fold(slot: int, fold: int) -> float:
            # entry.score is the normalized minimization score of this one fold
            entry = objective.eval_fold(candidates[slot], fold, proposer="racing")
            return entry.score

        result = race(
            eval_fold,
            n_configs=len(candidates),
            n_folds=folds,
            t_first=cfg.t_first,
            t_each=cfg.t_each,
            alpha=cfg.alpha,
            test=cfg.test,
            n_min=cfg.n_min,
        )
        races.append(result)
        elites = [(candidates[i], result.means[i]) for i in result.ranked]
    return IRaceResult(objective.archive, elites, races)
