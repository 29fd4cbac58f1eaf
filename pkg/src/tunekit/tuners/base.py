"""Common tuner contract, termination criteria and the tuning driver.

Every tuner proposes valid configurations (optionally with a fidelity) and
advances its state only through ``observe`` of the archive entries it
proposed. The driver alternates propose / evaluate / observe until a
termination criterion fires or the tuner reports exhaustion.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from ..errors import TunekitError, WarmStartError
from ..objective import Archive, ArchiveEntry, Objective, incumbent
from ..space import Config, SearchSpace


@dataclass(frozen=True)
class Proposal:
    config: Config
    fidelity: float | None = None


class Tuner:
    name = "tuner"

    def __init__(self, space: SearchSpace, seed: int = 0):
        from ..rng import derive

        self.space = space
        self.seed = int(seed)
        self.rng = derive(self.seed, "tuner")
        self._warm: list[Config] = []

    def propose(self, archive: Archive, n: int) -> list[Proposal]:
        raise NotImplementedError

    def observe(self, entries: list[ArchiveEntry]) -> None:
        pass

    def exhausted(self) -> bool:
        return False

    # default warm start: prepend prior incumbents to the first batch
    def warm_start(self, prior: Archive, prior_space: SearchSpace) -> None:
        self._check_prior_space(prior_space)
        ranked = sorted(
            (e for e in prior if not e.failed), key=lambda e: (e.score, e.index)
        )
        self._warm = [e.config for e in ranked]

    def _check_prior_space(self, prior_space: SearchSpace) -> None:
        if not self.space.compatible_with(prior_space):
            raise WarmStartError("prior archive space does not match tuner space")

    def _take_warm(self, n: int) -> list[Proposal]:
        take, self._warm = self._warm[:n], self._warm[n:]
        return [Proposal(c) for c in take]


@dataclass
class TerminationStack:
    """Any-trigger stack of stopping rules; a hard budget is mandatory.

    ``stagnation`` is (window, delta): stop when the last ``window``
    evaluations improved the incumbent by at most ``delta``. ``ei_threshold``
    applies to surrogate tuners that report their current maximal expected
    improvement.
    """

    max_evals: int | None = None
    max_fidelity: float | None = None
    max_wall_time: float | None = None
    target_score: float | None = None
    stagnation: tuple[int, float] | None = None
    ei_threshold: float | None = None

    def __post_init__(self):
        if self.max_evals is None and self.max_fidelity is None and self.max_wall_time is None:
            raise TunekitError("termination needs a hard budget (evals, fidelity or wall time)")


def should_stop(
    criteria: TerminationStack,
    archive: Archive,
    elapsed: float = 0.0,
    ei_max: float | None = None,
) -> tuple[bool, str | None]:
    """Evaluate the stack; reports the first criterion that fires."""
    if criteria.max_evals is not None and len(archive) >= criteria.max_evals:
        return True, "max_evals"
    if criteria.max_fidelity is not None:
        spent = sum(e.budget_units() for e in archive)
        if spent >= criteria.max_fidelity:
            return True, "max_fidelity"
    if criteria.max_wall_time is not None and elapsed >= criteria.max_wall_time:
        return True, "max_wall_time"
    if criteria.target_score is not None and len(archive):
        best = min((e.score for e in archive if not e.failed), default=math.inf)
        if best <= criteria.target_score:
            return True, "target_score"
    if criteria.stagnation is not None and len(archive):
        window, delta = criteria.stagnation
        if len(archive) > window:
            head = [e.score for e in archive.entries[:-window] if not e.failed]
            tail = [e.score for e in archive.entries if not e.failed]
            if head and tail and min(head) - min(tail) <= delta:
                return True, "stagnation"
    if criteria.ei_threshold is not None and ei_max is not None and ei_max < criteria.ei_threshold:
        return True, "ei_threshold"
    return False, None


@dataclass
class TuningResult:
    archive: Archive
    stop_reason: str
    best: ArchiveEntry | None
    proposal_overhead: float = 0.0  # seconds spent inside propose/observe


def run_tuning(
    objective: Objective,
    tuner: Tuner,
    termination: TerminationStack,
    n_batch: int = 1,
    workers: int = 1,
    level: str = "config",
) -> TuningResult:
    """Drive one tuner against one objective until termination."""
    start = time.perf_counter()
    overhead = 0.0
    stop_reason = "exhausted"
    while True:
        stop, reason = should_stop(
            termination,
            objective.archive,
            elapsed=time.perf_counter() - start,
            ei_max=getattr(tuner, "last_max_ei", None),
        )
        if stop:
            stop_reason = reason
            break
        if tuner.exhausted():
            stop_reason = "exhausted"
            break
        n = n_batch
        if termination.max_evals is not None:
            n = min(n, termination.max_evals - len(objective.archive))
        t0 = time.perf_counter()
        proposals = tuner.propose(objective.archive, n)
        overhead += time.perf_counter() - t0
        if not proposals:
            stop_reason = "exhausted"
            break
        entries = objective.evaluate_batch(
            [(p.config, p.fidelity) for p in proposals],
            proposer=tuner.name,
            workers=workers,
            level=level,
        )
        t0 = time.perf_counter()
        tuner.observe(entries)
        overhead += time.perf_counter() - t0
    best = None
    if any(not e.failed for e in objective.archive):
        best = incumbent(objective.archive)
    return TuningResult(objective.archive, stop_reason, best, overhead)
