"""Successive halving and Hyperband over an abstract fidelity unit.

A bracket with exploration level s starts p_s uniformly sampled
configurations at fidelity f_upp * eta^(-s) and repeatedly keeps the best
1/eta fraction while multiplying the fidelity by eta. Hyperband runs one
bracket per exploration level s = s_max .. 0, with the per-bracket budget
B = (s_max + 1) * f_upp. Schedules are computed in exact rational
arithmetic so the per-stage budget bound can be asserted exactly.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

from ..errors import TunekitError
from ..objective import Archive, ArchiveEntry, Objective
from ..space import Config, SearchSpace, sample_uniform
from .base import Proposal, Tuner


@dataclass(frozen=True)
class Stage:
    t: int
    n_configs: int
    fidelity: Fraction
    keep: int  # survivors selected after this stage

    @property
    def spend(self) -> Fraction:
        return self.n_configs * self.fidelity


@dataclass(frozen=True)
class Bracket:
    s: int
    p0: int
    stages: tuple[Stage, ...]

    def total_spend(self) -> Fraction:
        return sum((st.spend for st in self.stages), Fraction(0))


def max_exploration_level(eta, fid_upper) -> int:
    """Largest s with eta^s <= fid_upper, in exact arithmetic."""
    eta_f = Fraction(eta)
    upp = Fraction(fid_upper)
    s = 0
    power = eta_f
    while power <= upp:
        s += 1
        power *= eta_f
    return s


def fidelity_ladder(eta, fid_upper) -> list[Fraction]:
    """(f_upp * eta^-s_max, ..., f_upp): geometric ladder up to full fidelity."""
    s_max = max_exploration_level(eta, fid_upper)
    eta_f, upp = Fraction(eta), Fraction(fid_upper)
    return [upp / eta_f ** (s_max - i) for i in range(s_max + 1)]


def sh_bracket(s: int, eta, fid_upper) -> Bracket:
    """Successive-halving schedule for exploration level ``s``.

    Starting population p_s = ceil((B / f_upp) * eta^s / (s + 1)); stage t
    runs floor(p_s * eta^-t) configurations at the ladder fidelity
    f_upp * eta^(t - s) and keeps the floor(p^[t] / eta) best.
    """
    s_max = max_exploration_level(eta, fid_upper)
    if not 0 <= s <= s_max:
        raise TunekitError(f"bracket level must be in [0, {s_max}]")
    eta_f = Fraction(eta)
    ladder = fidelity_ladder(eta, fid_upper)
    p_s = -((-(s_max + 1) * eta_f**s) // (s + 1))  # ceil of a Fraction
    p_s = int(p_s)
    stages = []
    for t in range(s + 1):
        n_t = int(p_s / eta_f**t)  # floor: Fraction -> int truncates toward zero (positive)
        keep = int(Fraction(n_t) / eta_f)
        stages.append(Stage(t=t, n_configs=n_t, fidelity=ladder[s_max - s + t], keep=keep))
    return Bracket(s=s, p0=p_s, stages=tuple(stages))


def hyperband_schedule(eta, fid_upper) -> list[Bracket]:
    """All brackets, most explorative (s = s_max) first."""
    if not Fraction(fid_upper) > Fraction(eta) > 1:
        raise TunekitError("hyperband needs fid_upper > eta > 1")
    s_max = max_exploration_level(eta, fid_upper)
    return [sh_bracket(s, eta, fid_upper) for s in range(s_max, -1, -1)]


def budget_bound(eta, fid_upper) -> Fraction:
    """Per-bracket fidelity budget B = (s_max + 1) * f_upp."""
    return (max_exploration_level(eta, fid_upper) + 1) * Fraction(fid_upper)


class HyperbandTuner(Tuner):
    """Walks the bracket schedule behind the propose/observe contract.

    Stage survivors are the top floor(p / eta) entries of the stage by
    score, ties resolved toward the earlier evaluation index; survivors are
    re-evaluated at the next (eta times larger) fidelity.
    """

    name = "hyperband"

    def __init__(self, space: SearchSpace, seed: int = 0, eta=2, fid_upper=None):
        super().__init__(space, seed)
        if fid_upper is None:
            raise TunekitError("hyperband needs the upper fidelity bound")
        self.eta = eta
        self.fid_upper = fid_upper
        self.brackets = hyperband_schedule(eta, fid_upper)
        self._bracket_idx = 0
        self._stage_idx = 0
        self._population: list[Config] = []
        self._to_propose: list[Config] = []
        self._stage_entries: list[ArchiveEntry] = []
        self._awaiting = 0
        self._start_stage()

    def _current(self) -> tuple[Bracket, Stage] | None:
        if self._bracket_idx >= len(self.brackets):
            return None
        bracket = self.brackets[self._bracket_idx]
        return bracket, bracket.stages[self._stage_idx]

    def _start_stage(self) -> None:
        cur = self._current()
        if cur is None:
            return
        bracket, stage = cur
        if self._stage_idx == 0:
            self._population = []  # filled lazily from warm starts / uniform sampling
            needed = stage.n_configs
            warm = [p.config for p in self._take_warm(needed)]
            self._population = warm + [
                sample_uniform(self.space, self.rng) for _ in range(needed - len(warm))
            ]
        self._to_propose = list(self._population[: stage.n_configs])
        self._stage_entries = []
        self._awaiting = len(self._to_propose)

    def exhausted(self) -> bool:
        return self._current() is None

    def propose(self, archive: Archive, n: int) -> list[Proposal]:
        cur = self._current()
        if cur is None:
            return []
        _, stage = cur
        out = []
        while self._to_propose and len(out) < n:
            cfg = self._to_propose.pop(0)
            out.append(Proposal(cfg, fidelity=float(stage.fidelity)))
        return out

    def observe(self, entries: list[ArchiveEntry]) -> None:
        self._stage_entries.extend(entries)
        self._awaiting -= len(entries)
        if self._awaiting > 0 or self._to_propose:
            return
        cur = self._current()
        if cur is None:
            return
        bracket, stage = cur
        ranked = sorted(self._stage_entries, key=lambda e: (e.score, e.index))
        survivors = [e.config for e in ranked[: stage.keep]]
        if self._stage_idx + 1 <= bracket.s and survivors:
            self._population = survivors
            self._stage_idx += 1
        else:
            self._bracket_idx += 1
            self._stage_idx = 0
        self._start_stage()


def hyperband_run(
    objective: Objective,
    eta=2,
    seed: int = 0,
    workers: int = 1,
    level: str = "config",
) -> Archive:
    """Run the full bracket schedule against an objective with fidelity."""
    if objective.fidelity is None:
        raise TunekitError("hyperband needs an objective with fidelity semantics")
    fid_upper = objective.fidelity.upper
    ladder = fidelity_ladder(eta, fid_upper)
    if float(ladder[0]) < objective.fidelity.lower:
        raise TunekitError(
            f"bracket start fidelity {float(ladder[0])} below objective lower bound"
        )
    tuner = HyperbandTuner(objective.space, seed=seed, eta=eta, fid_upper=fid_upper)
    while not tuner.exhausted():
        proposals = tuner.propose(objective.archive, n=10**9)
        if not proposals:
            break
        entries = objective.evaluate_batch(
            [(p.config, p.fidelity) for p in proposals],
            proposer=tuner.name,
            workers=workers,
            level=level,
        )
        tuner.observe(entries)
    return objective.archive
