"""Tuner benchmark harness: same budget, per-seed anytime traces.

Every tuner gets an identical termination stack and a fresh objective per
seed; results are whole optimization traces, summarized as best-so-far
quantiles at budget checkpoints plus per-run proposal overhead.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import TunekitError
from .objective import Objective, trace
from .space import SearchSpace
from .tuners.base import TerminationStack, Tuner, run_tuning


@dataclass
class BenchmarkRun:
    tuner: str
    seed: int
    best_score: float | None
    trace_best: list[float]  # best-so-far by evaluation index
    overhead_seconds: float


@dataclass
class BenchmarkResult:
    runs: list[BenchmarkRun]
    budget_evals: int
    checkpoints: list[int]

    def tuner_names(self) -> list[str]:
        seen: list[str] = []
        for r in self.runs:
            if r.tuner not in seen:
                seen.append(r.tuner)
        return seen

    def best_at(self, run: BenchmarkRun, checkpoint: int) -> float:
        idx = min(checkpoint, len(run.trace_best)) - 1
        return run.trace_best[idx] if idx >= 0 else math.inf

    def summary_rows(self) -> list[dict]:
        rows = []
        for name in self.tuner_names():
            runs = [r for r in self.runs if r.tuner == name]
            row: dict = {"tuner": name, "n_seeds": len(runs)}
            for cp in self.checkpoints:
                vals = np.asarray([self.best_at(r, cp) for r in runs])
                row[f"median@{cp}"] = float(np.median(vals))
                row[f"q25@{cp}"] = float(np.percentile(vals, 25))
                row[f"q75@{cp}"] = float(np.percentile(vals, 75))
            row["overhead_s"] = float(np.mean([r.overhead_seconds for r in runs]))
            rows.append(row)
        return rows

    def win_fraction(self, a: str, b: str) -> float:
        """Fraction of shared seeds where tuner ``a`` ends strictly better."""
        runs_a = {r.seed: r for r in self.runs if r.tuner == a}
        runs_b = {r.seed: r for r in self.runs if r.tuner == b}
        shared = sorted(set(runs_a) & set(runs_b))
        if not shared:
            raise TunekitError("no shared seeds to compare")
        wins = sum(
            1
            for s in shared
            if self.best_at(runs_a[s], self.budget_evals)
            < self.best_at(runs_b[s], self.budget_evals)
        )
        return wins / len(shared)

    def table(self) -> str:
        rows = self.summary_rows()
        if not rows:
            return "(no runs)"
        cols = list(rows[0].keys())
        widths = {c: max(len(c), *(len(_fmt(r[c])) for r in rows)) for c in cols}
        lines = ["  ".join(c.ljust(widths[c]) for c in cols)]
        for r in rows:
            lines.append("  ".join(_fmt(r[c]).ljust(widths[c]) for c in cols))
        return "\n".join(lines)


def _fmt(v) -> str:
    if isinstance(v, float):
        return f"{v:.4g}"
    return str(v)


def run_benchmark(
    objective_factory: Callable[[int], Objective],
    tuner_factories: dict[str, Callable[[SearchSpace, int], Tuner]],
    budget_evals: int,
    seeds: list[int],
    n_batch: int = 1,
    checkpoints: list[int] | None = None,
) -> BenchmarkResult:
    """Race >= 2 tuners under one shared evaluation budget across seeds."""
    if len(tuner_factories) < 2:
        raise TunekitError("benchmark needs >= 2 tuners")
    if budget_evals < 1:
        raise TunekitError("benchmark budget must be positive")
    checkpoints = checkpoints or sorted(
        {max(1, budget_evals // 4), max(1, budget_evals // 2), budget_evals}
    )
    termination = TerminationStack(max_evals=budget_evals)
    runs: list[BenchmarkRun] = []
    for name, factory in tuner_factories.items():
        for seed in seeds:
            objective = objective_factory(seed)
            tuner = factory(objective.space, seed)
            result = run_tuning(objective, tuner, termination, n_batch=n_batch)
            points = trace(objective.archive)
            runs.append(
                BenchmarkRun(
                    tuner=name,
                    seed=seed,
                    best_score=None if result.best is None else result.best.score,
                    trace_best=[p.best_score for p in points],
                    overhead_seconds=result.proposal_overhead,
                )
            )
    return BenchmarkResult(runs, budget_evals, checkpoints)
