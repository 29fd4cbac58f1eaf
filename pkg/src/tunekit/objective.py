"""Black-box objectives over an append-only evaluation archive.

A resampled-ML objective wraps (learner, dataset, resampling plan, metric)
into a minimization target; a synthetic objective wraps an analytic test
function. Every evaluation appends one archive entry; per-evaluation
randomness derives from (master seed, evaluation index), so archives replay
bit-identically regardless of execution order or worker count.

Fidelity is an abstract positive unit. For resampled objectives a fidelity
value f maps to training-set subsampling at fraction f / f_upper (without
replacement, stratified for classification, at least two rows).
"""

from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import metrics as _metrics
from .data import Dataset, GEEstimate, ResamplingPlan, estimate_ge, subsample_indices
from .errors import DataError, TrainingError, TunekitError
from .rng import derive
from .space import Config, ParamSpec, SearchSpace, sample_uniform, validate

ARCHIVE_SCHEMA_VERSION = 1
DEFAULT_CRASH_PENALTY = 1e9


@dataclass(frozen=True)
class ArchiveEntry:
    """One evaluated configuration. ``score`` is always minimized."""

    index: int
    config: Config
    fidelity: float | None
    score: float
    raw_score: float | None
    per_split: tuple
    failed: bool
    error: str | None
    wall_time: float
    proposer: str

    def budget_units(self) -> float:
        return 1.0 if self.fidelity is None else float(self.fidelity)


class Archive:
    """Append-only evaluation log with strictly increasing indices."""

    def __init__(self):
        self._entries: list[ArchiveEntry] = []

    def __len__(self) -> int:
        return len(self._entries)

    def __iter__(self):
        return iter(self._entries)

    def __getitem__(self, i: int) -> ArchiveEntry:
        return self._entries[i]

    @property
    def entries(self) -> tuple[ArchiveEntry, ...]:
        return tuple(self._entries)

    def next_index(self) -> int:
        return len(self._entries)

    def append(self, entry: ArchiveEntry) -> None:
        if entry.index != len(self._entries):
            raise TunekitError(
                f"archive append out of order: got index {entry.index}, expected {len(self._entries)}"
            )
        self._entries.append(entry)

    def to_jsonl(self) -> str:
        """Stable serialization; wall times live in run metadata, not here."""
        lines = []
        for e in self._entries:
            lines.append(
                json.dumps(
                    {
                        "schema": ARCHIVE_SCHEMA_VERSION,
                        "index": e.index,
                        "config": dict(e.config.canonical()),
                        "fidelity": e.fidelity,
                        "score": e.score,
                        "raw_score": e.raw_score,
                        "per_split": list(e.per_split),
                        "failed": e.failed,
                        "error": e.error,
                        "proposer": e.proposer,
                    },
                    sort_keys=True,
                )
            )
        return "\n".join(lines) + ("\n" if lines else "")

    @staticmethod
    def from_jsonl(text: str) -> "Archive":
        archive = Archive()
        for line in text.splitlines():
            if not line.strip():
                continue
            d = json.loads(line)
            archive.append(
                ArchiveEntry(
                    index=d["index"],
                    config=Config(d["config"]),
                    fidelity=d["fidelity"],
                    score=d["score"],
                    raw_score=d["raw_score"],
                    per_split=tuple(d["per_split"]),
                    failed=d["failed"],
                    error=d["error"],
                    wall_time=0.0,
                    proposer=d["proposer"],
                )
            )
        return archive

    def config_columns(self) -> list[str]:
        names: list[str] = []
        for e in self._entries:
            for k, _ in e.config.canonical():
                if k not in names:
                    names.append(k)
        return names

    def to_csv(self) -> str:
        """Flat table; inactive parameters are empty cells."""
        import csv as _csv
        import io as _io

        cols = self.config_columns()
        buf = _io.StringIO()
        writer = _csv.writer(buf)
        writer.writerow(
            ["index", "fidelity", "score", "raw_score", "failed", "proposer"] + cols
        )
        for e in self._entries:
            row = [
                e.index,
                "" if e.fidelity is None else repr(float(e.fidelity)),
                repr(float(e.score)),
                "" if e.raw_score is None else repr(float(e.raw_score)),
                int(e.failed),
                e.proposer,
            ]
            row += ["" if e.config.get(c) is None else str(e.config.get(c)) for c in cols]
            writer.writerow(row)
        return buf.getvalue()


def incumbent(archive: Archive) -> ArchiveEntry:
    """Best-observed identification: minimal score, ties to the earliest index."""
    best = None
    for e in archive:
        if e.failed:
            continue
        if best is None or e.score < best.score:
            best = e
    if best is None:
        raise TunekitError("archive has no successful evaluation")
    return best


@dataclass(frozen=True)
class TracePoint:
    index: int
    cumulative_fidelity: float
    wall_time: float
    best_score: float


def trace(archive: Archive) -> list[TracePoint]:
    """Anytime best-so-far series with cumulative fidelity and wall time."""
    points: list[TracePoint] = []
    best = math.inf
    cum_fid = 0.0
    cum_time = 0.0
    for e in archive:
        cum_fid += e.budget_units()
        cum_time += e.wall_time
        if not e.failed and e.score < best:
            best = e.score
        points.append(TracePoint(e.index, cum_fid, cum_time, best))
    return points


@dataclass(frozen=True)
class FidelitySpec:
    """Designated fidelity parameter with its bounds (abstract units)."""

    name: str = "fidelity"
    lower: float = 1.0
    upper: float = 1.0

    def __post_init__(self):
        if not 0 < self.lower <= self.upper:
            raise DataError("fidelity bounds need 0 < lower <= upper")

    def as_param_spec(self) -> ParamSpec:
        return ParamSpec(self.name, "real", lower=0.0, upper=float(self.upper))


class Objective:
    """Common archive bookkeeping for resampled and synthetic objectives."""

    kind = "abstract"

    def __init__(
        self,
        space: SearchSpace,
        direction: str,
        master_seed: int,
        fidelity: FidelitySpec | None = None,
        crash_penalty: float | None = None,
    ):
        self.space = space
        self.direction = direction
        self.master_seed = int(master_seed)
        self.fidelity = fidelity
        self.crash_penalty = crash_penalty
        self.archive = Archive()

    # -- hooks -------------------------------------------------------------
    def _evaluate_raw(self, cfg: Config, fidelity: float | None, eval_index: int):
        """Return (raw_metric_value, per_split tuple)."""
        raise NotImplementedError

    @property
    def n_folds(self) -> int:
        return 1

    def eval_fold(self, cfg: Config, fold: int, proposer: str = "") -> ArchiveEntry:
        raise NotImplementedError(f"{self.kind} objective has no fold-level evaluation")

    # -- shared ------------------------------------------------------------
    def _normalize(self, raw: float) -> float:
        return -raw if self.direction == "max" else raw

    def _check_cfg(self, cfg: Config):
        verdict = validate(self.space, cfg)
        if not verdict.ok:
            raise DataError("invalid configuration: " + "; ".join(verdict.violations))

    def _resolve_fidelity(self, fidelity: float | None) -> float | None:
        if self.fidelity is None:
            if fidelity is not None:
                raise DataError("objective has no fidelity semantics")
            return None
        if fidelity is None:
            return float(self.fidelity.upper)
        if not self.fidelity.lower <= fidelity <= self.fidelity.upper:
            raise DataError(
                f"fidelity {fidelity} outside [{self.fidelity.lower}, {self.fidelity.upper}]"
            )
        return float(fidelity)

    def _worst_finite(self) -> float | None:
        worst = None
        for e in self.archive:
            if not e.failed and math.isfinite(e.score):
                worst = e.score if worst is None else max(worst, e.score)
        return worst

    def _failure_score(self) -> float:
        if self.crash_penalty is not None:
            return float(self.crash_penalty)
        worst = self._worst_finite()
        return DEFAULT_CRASH_PENALTY if worst is None else worst + 1.0

    def compute(self, cfg: Config, fidelity: float | None, eval_index: int) -> dict:
        """Pure evaluation: no archive side effects (parallel workers call this)."""
        fid = self._resolve_fidelity(fidelity)
        self._check_cfg(cfg)
        start = time.perf_counter()
        try:
            raw, per_split = self._evaluate_raw(cfg, fid, eval_index)
            return {
                "raw": raw,
                "per_split": per_split,
                "failed": False,
                "error": None,
                "fidelity": fid,
                "wall": time.perf_counter() - start,
            }
        except (TrainingError, _metrics.MetricUndefinedError) as exc:
            return {
                "raw": None,
                "per_split": (),
                "failed": True,
                "error": str(exc),
                "fidelity": fid,
                "wall": time.perf_counter() - start,
            }

    def record(self, cfg: Config, result: dict, proposer: str) -> ArchiveEntry:
        index = self.archive.next_index()
        if result["failed"]:
            score = self._failure_score()
            raw = None
        else:
            raw = float(result["raw"])
            score = self._normalize(raw)
        entry = ArchiveEntry(
            index=index,
            config=cfg,
            fidelity=result["fidelity"],
            score=score,
            raw_score=raw,
            per_split=tuple(result["per_split"]),
            failed=result["failed"],
            error=result["error"],
            wall_time=result["wall"],
            proposer=proposer,
        )
        self.archive.append(entry)
        return entry

    def evaluate(self, cfg: Config, fidelity: float | None = None, proposer: str = "") -> ArchiveEntry:
        result = self.compute(cfg, fidelity, self.archive.next_index())
        return self.record(cfg, result, proposer)

    def supports_split_jobs(self) -> bool:
        return False

    def evaluate_batch(
        self,
        proposals: Sequence,
        proposer: str = "",
        workers: int = 1,
        level: str = "config",
    ) -> list[ArchiveEntry]:
        """Evaluate a batch of (config, fidelity) proposals, then append in order.

        ``level`` picks the job granularity: ``config`` runs one job per
        proposal, ``fold`` parallelizes inner splits within one proposal at a
        time, ``combined`` schedules every (proposal, split) pair at once and
        ``batch`` runs the whole iteration as a single job. Archive indices
        are pre-assigned, so results are identical for any worker count.
        """
        from .parallel import run_jobs

        norm: list[tuple[Config, float | None]] = []
        for p in proposals:
            if isinstance(p, tuple):
                norm.append((p[0], p[1]))
            else:
                norm.append((p, None))
        base = self.archive.next_index()
        self.last_job_count = 0

        if level in ("fold", "combined") and self.supports_split_jobs():
            results = self._batch_split_jobs(norm, base, workers, level)
        elif level == "batch":
            self.last_job_count = 1
            results = [self.compute(cfg, fid, base + i) for i, (cfg, fid) in enumerate(norm)]
        else:
            jobs = [
                (lambda cfg=cfg, fid=fid, idx=base + i: self.compute(cfg, fid, idx))
                for i, (cfg, fid) in enumerate(norm)
            ]
            self.last_job_count = len(jobs)
            results = run_jobs(jobs, workers)
        return [self.record(cfg, res, proposer) for (cfg, _), res in zip(norm, results)]

    def _batch_split_jobs(self, norm, base, workers, level):  # pragma: no cover - overridden
        raise NotImplementedError


class ResampledObjective(Objective):
    """Estimated generalization error of a learner over a resampling plan."""

    kind = "resampled"

    def __init__(
        self,
        learner,
        space: SearchSpace,
        dataset: Dataset,
        plan: ResamplingPlan,
        metric,
        master_seed: int,
        fidelity: FidelitySpec | None = None,
        crash_penalty: float | None = None,
        agr: Callable[[Sequence[float]], float] | None = None,
    ):
        metric = _metrics.get_metric(metric)
        super().__init__(space, metric.direction, master_seed, fidelity, crash_penalty)
        self.learner = learner
        self.dataset = dataset
        self.plan = plan
        self.metric = metric
        self.agr = agr

    @property
    def n_folds(self) -> int:
        return self.plan.B

    def _subsample_override(self, fid: float | None, eval_index: int):
        if fid is None or self.fidelity is None or fid >= self.fidelity.upper:
            return None
        fraction = fid / self.fidelity.upper
        y = self.dataset.target if self.dataset.task == "classification" else None

        def override(split_idx: int, train_idx: np.ndarray) -> np.ndarray:
            rng = derive(self.master_seed, "subsample", eval_index, split_idx)
            return subsample_indices(y, train_idx, fraction, rng, minimum=2)

        return override

    def _eval_seed(self, eval_index: int) -> int:
        return int(derive(self.master_seed, "eval", eval_index).integers(2**63))

    def _estimate(self, cfg: Config, fid: float | None, eval_index: int, plan: ResamplingPlan):
        params = cfg.transformed(self.space)
        return estimate_ge(
            self.learner,
            params,
            self.dataset,
            plan,
            self.metric,
            agr=self.agr,
            master_seed=self._eval_seed(eval_index),
            train_index_override=self._subsample_override(fid, eval_index),
        )

    def _evaluate_raw(self, cfg: Config, fid: float | None, eval_index: int):
        est = self._estimate(cfg, fid, eval_index, self.plan)
        return est.aggregate, tuple(s for s in est.per_split)

    def supports_split_jobs(self) -> bool:
        return True

    def compute_split(self, cfg: Config, fid: float | None, eval_index: int, split_idx: int):
        """One (evaluation, split) job; bit-equal to the full-plan path."""
        from .data import evaluate_split

        params = cfg.transformed(self.space)
        train_idx, test_idx = self.plan.splits[split_idx]
        override = self._subsample_override(fid, eval_index)
        if override is not None:
            train_idx = override(split_idx, train_idx)
        rng = derive(self._eval_seed(eval_index), "split", split_idx)
        try:
            return evaluate_split(
                self.learner, params, self.dataset, train_idx, test_idx, self.metric, rng
            )
        except TrainingError as exc:
            raise TrainingError(f"split {split_idx}: {exc}", split=split_idx) from exc

    def _assemble_result(self, fid, per_split, wall: float) -> dict:
        from .data import aggregate_splits

        try:
            raw = aggregate_splits(per_split, self.agr)
            return {
                "raw": raw,
                "per_split": tuple(per_split),
                "failed": False,
                "error": None,
                "fidelity": fid,
                "wall": wall,
            }
        except _metrics.MetricUndefinedError as exc:
            return {
                "raw": None,
                "per_split": tuple(s for s in per_split if s is not None),
                "failed": True,
                "error": str(exc),
                "fidelity": fid,
                "wall": wall,
            }

    def _batch_split_jobs(self, norm, base, workers, level):
        """Evaluate proposals as per-split jobs at fold or combined granularity."""
        from .parallel import run_jobs

        B = self.plan.B
        resolved = [self._resolve_fidelity(fid) for _, fid in norm]
        for cfg, _ in norm:
            self._check_cfg(cfg)

        def job(i: int, j: int):
            cfg = norm[i][0]
            fid = resolved[i]

            def run():
                start = time.perf_counter()
                try:
                    value = self.compute_split(cfg, fid, base + i, j)
                    return ("ok", value, time.perf_counter() - start)
                except TrainingError as exc:
                    return ("fail", str(exc), time.perf_counter() - start)

            return run

        if level == "combined":
            jobs = [job(i, j) for i in range(len(norm)) for j in range(B)]
            self.last_job_count = len(jobs)
            flat = run_jobs(jobs, workers)
            groups = [flat[i * B : (i + 1) * B] for i in range(len(norm))]
        else:  # fold: one proposal at a time, splits in parallel
            groups = []
            for i in range(len(norm)):
                jobs = [job(i, j) for j in range(B)]
                self.last_job_count += len(jobs)
                groups.append(run_jobs(jobs, workers))

        results = []
        for i, group in enumerate(groups):
            wall = sum(g[2] for g in group)
            failures = [g for g in group if g[0] == "fail"]
            if failures:
                results.append(
                    {
                        "raw": None,
                        "per_split": (),
                        "failed": True,
                        "error": failures[0][1],
                        "fidelity": resolved[i],
                        "wall": wall,
                    }
                )
            else:
                results.append(self._assemble_result(resolved[i], [g[1] for g in group], wall))
        return results

    def eval_fold(self, cfg: Config, fold: int, proposer: str = "") -> ArchiveEntry:
        """Evaluate on one resampling split only (racing granularity)."""
        if not 0 <= fold < self.plan.B:
            raise DataError(f"fold {fold} outside plan with B={self.plan.B}")
        sub_plan = ResamplingPlan([self.plan.splits[fold]])
        index = self.archive.next_index()
        self._check_cfg(cfg)
        start = time.perf_counter()
        try:
            est = self._estimate(cfg, None, index, sub_plan)
            result = {
                "raw": est.aggregate,
                "per_split": (est.per_split[0],),
                "failed": False,
                "error": None,
                "fidelity": self._resolve_fidelity(None),
                "wall": time.perf_counter() - start,
            }
        except (TrainingError, _metrics.MetricUndefinedError) as exc:
            result = {
                "raw": None,
                "per_split": (),
                "failed": True,
                "error": str(exc),
                "fidelity": self._resolve_fidelity(None),
                "wall": time.perf_counter() - start,
            }
        return self.record(cfg, result, proposer)


class SyntheticObjective(Objective):
    """Analytic minimization target, optionally with additive Gaussian noise."""

    kind = "synthetic"

    def __init__(
        self,
        fn: "SyntheticFunction",
        master_seed: int,
        noise_sd: float = 0.0,
        fidelity: FidelitySpec | None = None,
    ):
        super().__init__(fn.space, "min", master_seed, fidelity)
        self.fn = fn
        self.noise_sd = float(noise_sd)

    def _evaluate_raw(self, cfg: Config, fid: float | None, eval_index: int):
        x = np.asarray([cfg[s.name] for s in self.fn.space.specs], dtype=float)
        value = float(self.fn.fn(x))
        if self.noise_sd > 0:
            rng = derive(self.master_seed, "noise", eval_index)
            value += float(rng.normal(0.0, self.noise_sd))
        return value, (value,)

    @property
    def n_folds(self) -> int:
        return 10**9  # noisy draws play the role of instances

    def eval_fold(self, cfg: Config, fold: int, proposer: str = "") -> ArchiveEntry:
        """Fold-indexed noisy draw so racing can treat draws as instances."""
        index = self.archive.next_index()
        self._check_cfg(cfg)
        start = time.perf_counter()
        x = np.asarray([cfg[s.name] for s in self.fn.space.specs], dtype=float)
        value = float(self.fn.fn(x))
        if self.noise_sd > 0:
            rng = derive(self.master_seed, "fold-noise", index, fold)
            value += float(rng.normal(0.0, self.noise_sd))
        result = {
            "raw": value,
            "per_split": (value,),
            "failed": False,
            "error": None,
            "fidelity": self._resolve_fidelity(None),
            "wall": time.perf_counter() - start,
        }
        return self.record(cfg, result, proposer)


@dataclass(frozen=True)
class SyntheticFunction:
    """Deterministic test function with its box space."""

    id: str
    dim: int
    space: SearchSpace
    fn: Callable[[np.ndarray], float]

    def reference_optimum(self, n_grid: int = 201) -> float:
        """Approximate the global minimum by dense axis-aligned search.

        For the bundled functions the optimum is separable or 2-d, so a
        dense grid plus local polish is adequate at desk scale.
        """
        from scipy.optimize import minimize

        lows = np.asarray([s.lower for s in self.space.specs])
        highs = np.asarray([s.upper for s in self.space.specs])
        if self.dim <= 2:
            axes = [np.linspace(lo, hi, n_grid) for lo, hi in zip(lows, highs)]
            grids = np.meshgrid(*axes)
            pts = np.stack([g.ravel() for g in grids], axis=1)
            vals = np.asarray([self.fn(p) for p in pts])
            x0 = pts[int(np.argmin(vals))]
        else:
            x0 = (lows + highs) / 2.0
        res = minimize(
            self.fn, x0, method="Nelder-Mead", bounds=list(zip(lows, highs)),
            options={"xatol": 1e-10, "fatol": 1e-12, "maxiter": 2000},
        )
        return float(res.fun)


def _box_space(dim: int, lower: float, upper: float) -> SearchSpace:
    return SearchSpace(
        [ParamSpec(f"x{i + 1}", "real", lower=lower, upper=upper) for i in range(dim)]
    )


def _sphere(x: np.ndarray) -> float:
    return float(np.sum(x**2))


def _branin(u: np.ndarray) -> float:
    # classic two-dimensional multimodal benchmark, rescaled to the unit square
    x = 15.0 * u[0] - 5.0
    y = 15.0 * u[1]
    a, b, c, r, s, t = 1.0, 5.1 / (4 * math.pi**2), 5 / math.pi, 6.0, 10.0, 1 / (8 * math.pi)
    return float(a * (y - b * x**2 + c * x - r) ** 2 + s * (1 - t) * math.cos(x) + s)


def make_synthetic(fn_id: str, dim: int | None = None) -> SyntheticFunction:
    """Bundled synthetic functions: sphere, branin, low_effective_dim."""
    if fn_id == "sphere":
        d = dim or 3
        return SyntheticFunction("sphere", d, _box_space(d, -5.12, 5.12), _sphere)
    if fn_id == "branin":
        if dim not in (None, 2):
            raise DataError("branin is two-dimensional")
        return SyntheticFunction("branin", 2, _box_space(2, 0.0, 1.0), _branin)
    if fn_id == "low_effective_dim":
        d = dim or 2

        def fn(x: np.ndarray) -> float:
            # only the first coordinate matters; optimum off any coarse grid
            return float((x[0] - 0.7) ** 2)

        return SyntheticFunction("low_effective_dim", d, _box_space(d, 0.0, 1.0), fn)
    raise DataError(f"unknown synthetic function {fn_id!r}")


def synthetic_objective(
    fn_id: str,
    master_seed: int,
    dim: int | None = None,
    noise_sd: float = 0.0,
    fidelity: FidelitySpec | None = None,
) -> SyntheticObjective:
    return SyntheticObjective(make_synthetic(fn_id, dim), master_seed, noise_sd, fidelity)
