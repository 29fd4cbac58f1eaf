"""Command-line entry point: tune, nested, benchmark, report.

All commands are driven by one YAML run configuration (see README for the
schema). Archives and reports are written deterministically; wall-clock
measurements are segregated into ``meta.json`` so re-running a command with
the same config and seed reproduces byte-identical artifact files.
"""

from __future__ import annotations

import datetime as _dt
import json
import sys
import time
from pathlib import Path

import click

from . import __version__
from .bench import run_benchmark
from .errors import RunConfigError, TunekitError
from .learn import get_learner
from .nested import KFoldSpec, TunedLearner, nested_evaluate
from .objective import Archive, incumbent, trace
from .rng import derive
from .runconfig import (
    RunConfig,
    build_objective,
    irace_settings,
    load_task_dataset,
    make_tuner_factory,
    parse_run_config,
    resolve_space,
)
from .tuners import run_tuning
from .tuners.racing import irace_run


def _load_config(path: str, seed, workers, level, out) -> RunConfig:
    text = Path(path).read_text()
    cfg = parse_run_config(text)
    # CLI flags override the document
    if seed is not None:
        cfg.seed = int(seed)
    if workers is not None:
        cfg.workers = int(workers)
    if level is not None:
        cfg.level = level
    if out is not None:
        cfg.output = out
    return cfg


def _write(out_dir: Path, name: str, text: str) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / name).write_text(text)


def _trace_csv(archive: Archive) -> str:
    lines = ["index,cumulative_fidelity,best_score"]
    for p in trace(archive):
        lines.append(f"{p.index},{p.cumulative_fidelity!r},{p.best_score!r}")
    return "\n".join(lines) + "\n"


def _meta(cfg: RunConfig, archive: Archive | None, extra: dict | None = None) -> str:
    meta = {
        "tunekit_version": __version__,
        "finished_at": _dt.datetime.now().isoformat(),
        "seed": cfg.seed,
        "workers": cfg.workers,
        "level": cfg.level,
    }
    if archive is not None:
        meta["wall_times"] = [e.wall_time for e in archive]
        meta["trace_wall"] = [p.wall_time for p in trace(archive)]
    if extra:
        meta.update(extra)
    return json.dumps(meta, indent=2, sort_keys=True)


def _summary(archive: Archive, stop_reason: str) -> str:
    doc = {
        "n_evaluations": len(archive),
        "n_failed": sum(1 for e in archive if e.failed),
        "stop_reason": stop_reason,
    }
    if any(not e.failed for e in archive):
        best = incumbent(archive)
        doc["best_index"] = best.index
        doc["best_score"] = best.score
        doc["best_raw_score"] = best.raw_score
        doc["best_config"] = dict(best.config.canonical())
    return json.dumps(doc, indent=2, sort_keys=True)


@click.group()
@click.version_option(__version__)
def main():
    """Desk-scale hyperparameter optimization."""


_common = [
    click.option("--config", "config_path", required=True, type=click.Path(exists=True, dir_okay=False)),
    click.option("--seed", type=int, default=None, help="Override the config seed."),
    click.option("--workers", type=int, default=None),
    click.option("--level", type=click.Choice(["outer", "batch", "config", "fold", "combined"]), default=None),
    click.option("--out", type=click.Path(file_okay=False), default=None),
]


def _with_common(fn):
    for opt in reversed(_common):
        fn = opt(fn)
    return fn


@main.command()
@_with_common
def tune(config_path, seed, workers, level, out):
    """Run one tuner against one objective and write the archive."""
    try:
        cfg = _load_config(config_path, seed, workers, level, out)
        objective = build_objective(cfg)
        kind = cfg.tuner["kind"]
        if kind == "racing":
            budget, ir_cfg = irace_settings(cfg.tuner)
            result_seed = int(derive(cfg.seed, "tuner-seed").integers(2**31))
            irace_run(objective, budget, seed=result_seed, config=ir_cfg)
            stop_reason = "racing_budget"
        else:
            factory = make_tuner_factory(cfg.tuner, cfg.fidelity)
            tuner = factory(objective.space, int(derive(cfg.seed, "tuner-seed").integers(2**31)))
            result = run_tuning(
                objective,
                tuner,
                cfg.termination,
                n_batch=int(cfg.tuner.get("n_batch", 1)),
                workers=cfg.workers,
                level=cfg.level,
            )
            stop_reason = result.stop_reason
    except (RunConfigError, TunekitError) as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(2)
    out_dir = Path(cfg.output)
    archive = objective.archive
    _write(out_dir, "archive.jsonl", archive.to_jsonl())
    _write(out_dir, "archive.csv", archive.to_csv())
    _write(out_dir, "trace.csv", _trace_csv(archive))
    _write(out_dir, "summary.json", _summary(archive, stop_reason))
    _write(out_dir, "meta.json", _meta(cfg, archive))
    click.echo(f"wrote {len(archive)} evaluations to {out_dir}")


@main.command()
@_with_common
def nested(config_path, seed, workers, level, out):
    """Nested resampling of the self-tuning learner; writes a fold report."""
    try:
        cfg = _load_config(config_path, seed, workers, level, out)
        if cfg.task["kind"] == "synthetic":
            raise RunConfigError("nested evaluation needs an ML task", path="task.kind")
        if cfg.outer_spec is None:
            raise RunConfigError("required field missing", path="resampling.outer")
        if cfg.tuner["kind"] == "racing":
            raise RunConfigError("racing is driven via the tune command", path="tuner.kind")
        dataset = load_task_dataset(cfg)
        learner = get_learner(cfg.learner_id)
        tuned = TunedLearner(
            learner=learner,
            metric=cfg.metric_id,
            inner=cfg.inner_spec or KFoldSpec(3),
            tuner_factory=make_tuner_factory(cfg.tuner, cfg.fidelity),
            termination=cfg.termination,
            space=resolve_space(cfg, learner),
            n_batch=int(cfg.tuner.get("n_batch", 1)),
            fidelity=cfg.fidelity,
        )
        outer_plan = cfg.outer_spec.instantiate(dataset, derive(cfg.seed, "outer-plan"))
        t0 = time.perf_counter()
        report = nested_evaluate(
            tuned, dataset, outer_plan, master_seed=cfg.seed, workers=cfg.workers, level=cfg.level
        )
        elapsed = time.perf_counter() - t0
    except (RunConfigError, TunekitError) as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(2)
    out_dir = Path(cfg.output)
    doc = {
        "metric": report.metric_id,
        "aggregate": report.aggregate,
        "sd": report.sd,
        "inner_best_mean": report.inner_best_mean,
        "folds": [
            {
                "fold": f.fold,
                "score": f.score,
                "chosen": dict(f.chosen.canonical()) if f.chosen else None,
                "inner_best_score": f.inner_best_score,
                "inner_archive": f"inner_archive_fold{f.fold}.jsonl",
                "error": f.error,
            }
            for f in report.per_fold
        ],
    }
    _write(out_dir, "nested_report.json", json.dumps(doc, indent=2, sort_keys=True))
    for f in report.per_fold:
        if f.inner_archive is not None:
            _write(out_dir, f"inner_archive_fold{f.fold}.jsonl", f.inner_archive.to_jsonl())
    lines = [f"nested {report.metric_id}: aggregate={report.aggregate} sd={report.sd}"]
    for f in report.per_fold:
        lines.append(
            f"  fold {f.fold}: score={f.score} inner_best={f.inner_best_score} chosen={f.chosen}"
        )
    _write(out_dir, "nested_report.txt", "\n".join(lines) + "\n")
    timing = {
        "wall_total": elapsed,
        "folds": [
            {"fold": f.fold, "tune_s": f.tune_seconds, "refit_s": f.refit_seconds, "eval_s": f.eval_seconds}
            for f in report.per_fold
        ],
    }
    _write(out_dir, "meta.json", _meta(cfg, None, extra={"timing": timing}))
    click.echo(f"nested aggregate {report.metric_id} = {report.aggregate} (wrote {out_dir})")


@main.command()
@_with_common
def benchmark(config_path, seed, workers, level, out):
    """Compare >= 2 tuners under one shared budget across seeds."""
    try:
        cfg = _load_config(config_path, seed, workers, level, out)
        if cfg.benchmark is None:
            raise RunConfigError("required field missing", path="benchmark")
        node = cfg.benchmark
        seeds = node.get("seeds") or list(range(int(node["n_seeds"])))
        seeds = [int(s) for s in seeds]
        factories = {}
        for t in node["tuners"]:
            name = t.get("name", t["kind"])
            if name in factories:
                raise RunConfigError(f"duplicate tuner name {name!r}", path="benchmark.tuners")
            if t["kind"] == "racing":
                raise RunConfigError("racing benchmark not supported", path="benchmark.tuners")
            factories[name] = make_tuner_factory(t, cfg.fidelity)
        result = run_benchmark(
            objective_factory=lambda s: build_objective(cfg, seed=s),
            tuner_factories=factories,
            budget_evals=int(node["budget_evals"]),
            seeds=seeds,
            n_batch=int(node.get("n_batch", 1)),
        )
    except (RunConfigError, TunekitError) as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(2)
    out_dir = Path(cfg.output)
    rows = ["tuner,seed,eval_index,best_score"]
    for r in result.runs:
        for i, b in enumerate(r.trace_best):
            rows.append(f"{r.tuner},{r.seed},{i},{b!r}")
    _write(out_dir, "traces.csv", "\n".join(rows) + "\n")
    summary = {
        "budget_evals": result.budget_evals,
        "checkpoints": result.checkpoints,
        "rows": result.summary_rows(),
        "wins": {
            f"{a}>{b}": result.win_fraction(a, b)
            for a in result.tuner_names()
            for b in result.tuner_names()
            if a != b
        },
    }
    _write(out_dir, "summary.json", json.dumps(summary, indent=2, sort_keys=True))
    _write(out_dir, "summary.txt", result.table() + "\n")
    _write(out_dir, "meta.json", _meta(cfg, None))
    click.echo(result.table())


@main.command()
@click.option("--archive", "archive_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--out", type=click.Path(file_okay=False), default=None)
def report(archive_path, out):
    """Re-render incumbent summary and trace from a stored archive."""
    try:
        archive = Archive.from_jsonl(Path(archive_path).read_text())
        if len(archive) == 0:
            raise TunekitError("archive is empty")
    except (TunekitError, json.JSONDecodeError, KeyError) as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(2)
    summary = _summary(archive, stop_reason="(from archive)")
    click.echo(summary)
    if out is not None:
        out_dir = Path(out)
        _write(out_dir, "summary.json", summary)
        _write(out_dir, "trace.csv", _trace_csv(archive))


if __name__ == "__main__":
    main()
