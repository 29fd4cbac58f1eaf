"""Run-configuration document: schema validation and object construction.

One YAML tree drives every CLI command. The schema is documented in the
README; validation reports the dotted path of the offending field and no
computation starts before the document passes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Any, Callable

import yaml

from . import synth_data
from .data import Dataset, read_csv
from .errors import RunConfigError
from .learn import get_learner
from .metrics import get_metric, metric_ids
from .nested import HoldoutSpec, KFoldSpec, TunedLearner
from .objective import FidelitySpec, Objective, ResampledObjective, synthetic_objective
from .parallel import LEVELS
from .rng import derive
from .space import SearchSpace, space_from_dict
from .tuners import (
    BOTuner,
    ESTuner,
    GridTuner,
    HyperbandTuner,
    IRaceConfig,
    RandomTuner,
    TerminationStack,
)

TUNER_KINDS = ("grid", "random", "es", "bo", "hyperband", "racing")
TASK_KINDS = ("dataset", "bundled", "synthetic")
SYNTHETIC_IDS = ("sphere", "branin", "low_effective_dim")


def _fail(path: str, message: str):
    raise RunConfigError(message, path=path)


def _expect_map(node, path: str) -> dict:
    if not isinstance(node, dict):
        _fail(path, f"expected a mapping, got {type(node).__name__}")
    return node


def _get(node: dict, key: str, path: str, required: bool = False, default=None):
    if key not in node or node[key] is None:
        if required:
            _fail(f"{path}.{key}" if path else key, "required field missing")
        return default
    return node[key]


def _expect_num(value, path: str, integer: bool = False, positive: bool = False):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        _fail(path, "expected a number")
    if integer and int(value) != value:
        _fail(path, "expected an integer")
    if positive and value <= 0:
        _fail(path, "expected a positive value")
    return int(value) if integer else float(value)


@dataclass
class RunConfig:
    raw: dict
    seed: int
    workers: int
    level: str
    output: str
    task: dict
    learner_id: str | None
    metric_id: str | None
    space_doc: list | None
    tuner: dict
    termination: TerminationStack
    inner_spec: object | None
    outer_spec: object | None
    fidelity: FidelitySpec | None
    benchmark: dict | None


def parse_run_config(doc: str | dict) -> RunConfig:
    """Validate the YAML tree and freeze it into a RunConfig."""
    if isinstance(doc, str):
        try:
            data = yaml.safe_load(doc)
        except yaml.YAMLError as exc:
            raise RunConfigError(f"not valid YAML: {exc}") from exc
    else:
        data = doc
    data = _expect_map(data, "")

    seed = _get(data, "seed", "", required=True)
    seed = _expect_num(seed, "seed", integer=True)
    workers = _expect_num(_get(data, "workers", "", default=1), "workers", integer=True)
    if workers < 1:
        _fail("workers", "must be >= 1")
    level = _get(data, "level", "", default="config")
    if level not in LEVELS:
        _fail("level", f"must be one of {LEVELS}")
    output = str(_get(data, "output", "", default="out"))

    task = _expect_map(_get(data, "task", "", required=True), "task")
    kind = _get(task, "kind", "task", required=True)
    if kind not in TASK_KINDS:
        _fail("task.kind", f"must be one of {TASK_KINDS}")
    if kind == "dataset":
        _get(task, "path", "task", required=True)
        _get(task, "target", "task", required=True)
        t = _get(task, "task_type", "task", required=True)
        if t not in ("regression", "classification"):
            _fail("task.task_type", "must be regression or classification")
    elif kind == "bundled":
        name = _get(task, "name", "task", required=True)
        if name not in synth_data.BUNDLED:
            _fail("task.name", f"must be one of {sorted(synth_data.BUNDLED)}")
    else:
        fid = _get(task, "id", "task", required=True)
        if fid not in SYNTHETIC_IDS:
            _fail("task.id", f"must be one of {SYNTHETIC_IDS}")

    learner_id = _get(data, "learner", "")
    metric_id = _get(data, "metric", "")
    if kind != "synthetic":
        if learner_id is None:
            _fail("learner", "required for ML tasks")
        if metric_id is None:
            _fail("metric", "required for ML tasks")
        if metric_id not in metric_ids():
            _fail("metric", f"unknown metric; choose from {metric_ids()}")

    space_doc = _get(data, "space", "")
    if space_doc is not None and not isinstance(space_doc, list):
        _fail("space", "expected a list of parameter entries")

    tuner = _expect_map(_get(data, "tuner", "", default={"kind": "random"}), "tuner")
    tkind = _get(tuner, "kind", "tuner", required=True)
    if tkind not in TUNER_KINDS:
        _fail("tuner.kind", f"must be one of {TUNER_KINDS}")
    if tkind == "grid":
        _expect_num(_get(tuner, "resolution", "tuner", default=3), "tuner.resolution", integer=True, positive=True)
    if tkind == "racing":
        _expect_num(_get(tuner, "budget", "tuner", required=True), "tuner.budget", integer=True, positive=True)

    term_node = _expect_map(_get(data, "termination", "", default={"max_evals": 20}), "termination")
    stag = term_node.get("stagnation")
    stagnation = None
    if stag is not None:
        stag = _expect_map(stag, "termination.stagnation")
        stagnation = (
            _expect_num(_get(stag, "window", "termination.stagnation", required=True),
                        "termination.stagnation.window", integer=True, positive=True),
            _expect_num(_get(stag, "delta", "termination.stagnation", required=True),
                        "termination.stagnation.delta"),
        )
    try:
        termination = TerminationStack(
            max_evals=(
                _expect_num(term_node["max_evals"], "termination.max_evals", integer=True, positive=True)
                if term_node.get("max_evals") is not None
                else None
            ),
            max_fidelity=(
                _expect_num(term_node["max_fidelity"], "termination.max_fidelity", positive=True)
                if term_node.get("max_fidelity") is not None
                else None
            ),
            max_wall_time=(
                _expect_num(term_node["max_wall_time"], "termination.max_wall_time", positive=True)
                if term_node.get("max_wall_time") is not None
                else None
            ),
            target_score=(
                _expect_num(term_node["target_score"], "termination.target_score")
                if term_node.get("target_score") is not None
                else None
            ),
            stagnation=stagnation,
            ei_threshold=(
                _expect_num(term_node["ei_threshold"], "termination.ei_threshold", positive=True)
                if term_node.get("ei_threshold") is not None
                else None
            ),
        )
    except Exception as exc:
        raise RunConfigError(str(exc), path="termination") from exc

    resampling = _expect_map(_get(data, "resampling", "", default={}), "resampling")
    inner_spec = _parse_resampling(resampling.get("inner"), "resampling.inner")
    outer_spec = _parse_resampling(resampling.get("outer"), "resampling.outer")

    fidelity = None
    fid_node = _get(data, "fidelity", "")
    if fid_node is not None:
        fid_node = _expect_map(fid_node, "fidelity")
        fidelity = FidelitySpec(
            lower=_expect_num(_get(fid_node, "lower", "fidelity", default=1.0), "fidelity.lower", positive=True),
            upper=_expect_num(_get(fid_node, "upper", "fidelity", required=True), "fidelity.upper", positive=True),
        )
    if tkind == "hyperband" and fidelity is None:
        _fail("fidelity", "hyperband needs fidelity bounds")

    benchmark = _get(data, "benchmark", "")
    if benchmark is not None:
        benchmark = _expect_map(benchmark, "benchmark")
        tuners = _get(benchmark, "tuners", "benchmark", required=True)
        if not isinstance(tuners, list) or len(tuners) < 2:
            _fail("benchmark.tuners", ">= 2 tuners required")
        for i, t in enumerate(tuners):
            t = _expect_map(t, f"benchmark.tuners[{i}]")
            if _get(t, "kind", f"benchmark.tuners[{i}]", required=True) not in TUNER_KINDS:
                _fail(f"benchmark.tuners[{i}].kind", f"must be one of {TUNER_KINDS}")
        _expect_num(_get(benchmark, "budget_evals", "benchmark", required=True),
                    "benchmark.budget_evals", integer=True, positive=True)
        seeds = benchmark.get("seeds")
        if seeds is None and benchmark.get("n_seeds") is None:
            _fail("benchmark", "needs seeds or n_seeds")

    return RunConfig(
        raw=data,
        seed=seed,
        workers=workers,
        level=level,
        output=output,
        task=task,
        learner_id=learner_id,
        metric_id=metric_id,
        space_doc=space_doc,
        tuner=tuner,
        termination=termination,
        inner_spec=inner_spec,
        outer_spec=outer_spec,
        fidelity=fidelity,
        benchmark=benchmark,
    )


def _parse_resampling(node, path: str):
    if node is None:
        return None
    node = _expect_map(node, path)
    kind = _get(node, "kind", path, required=True)
    stratify = bool(_get(node, "stratify", path, default=False))
    if kind == "holdout":
        fraction = _expect_num(_get(node, "fraction", path, default=2.0 / 3.0), f"{path}.fraction")
        if not 0 < fraction < 1:
            _fail(f"{path}.fraction", "must be in (0, 1)")
        return HoldoutSpec(fraction=fraction, stratify=stratify)
    if kind == "kfold":
        k = _expect_num(_get(node, "k", path, required=True), f"{path}.k", integer=True, positive=True)
        repeats = _expect_num(_get(node, "repeats", path, default=1), f"{path}.repeats", integer=True, positive=True)
        return KFoldSpec(k=k, repeats=repeats, stratify=stratify)
    _fail(f"{path}.kind", "must be holdout or kfold")


def load_task_dataset(cfg: RunConfig) -> Dataset:
    task = cfg.task
    if task["kind"] == "dataset":
        return read_csv(task["path"], target=task["target"], task=task["task_type"])
    if task["kind"] == "bundled":
        maker = synth_data.BUNDLED[task["name"]]
        kwargs = {}
        if task.get("n") is not None:
            kwargs["n"] = int(task["n"])
        return maker(seed=cfg.seed, **kwargs)
    raise RunConfigError("synthetic tasks have no dataset", path="task")


def resolve_space(cfg: RunConfig, learner) -> SearchSpace:
    if cfg.space_doc is not None:
        return space_from_dict(cfg.space_doc)
    return learner.space_preset()


def build_objective(cfg: RunConfig, seed: int | None = None) -> Objective:
    """Assemble the objective a tuner will optimize (seed overridable per run)."""
    seed = cfg.seed if seed is None else seed
    if cfg.task["kind"] == "synthetic":
        return synthetic_objective(
            cfg.task["id"],
            master_seed=seed,
            dim=int(cfg.task["dim"]) if cfg.task.get("dim") else None,
            noise_sd=float(cfg.task.get("noise_sd") or 0.0),
            fidelity=cfg.fidelity,
        )
    dataset = load_task_dataset(cfg)
    learner = get_learner(cfg.learner_id)
    space = resolve_space(cfg, learner)
    inner = cfg.inner_spec or KFoldSpec(3)
    plan = inner.instantiate(dataset, derive(seed, "inner-plan"))
    return ResampledObjective(
        learner,
        space,
        dataset,
        plan,
        cfg.metric_id,
        master_seed=int(derive(seed, "objective").integers(2**63)),
        fidelity=cfg.fidelity,
    )


def make_tuner_factory(tuner_node: dict, fidelity: FidelitySpec | None) -> Callable:
    """Factory (space, seed) -> Tuner for the propose/observe kinds."""
    kind = tuner_node["kind"]

    def factory(space: SearchSpace, seed: int):
        if kind == "random":
            return RandomTuner(space, seed=seed)
        if kind == "grid":
            return GridTuner(space, resolution=int(tuner_node.get("resolution", 3)), seed=seed)
        if kind == "es":
            return ESTuner(
                space,
                seed=seed,
                mu=int(tuner_node.get("mu", 10)),
                lam=int(tuner_node.get("lam", 10)),
                p_crossover=float(tuner_node.get("p_crossover", 0.7)),
                sigma_fraction=float(tuner_node.get("sigma_fraction", 0.1)),
                p_cat_mutation=float(tuner_node.get("p_cat_mutation", 0.1)),
            )
        if kind == "bo":
            return BOTuner(
                space,
                seed=seed,
                init_design=tuner_node.get("init_design"),
                acquisition=tuner_node.get("acquisition", "ei"),
                n_candidates=int(tuner_node.get("n_candidates", 1000)),
                gp_restarts=int(tuner_node.get("gp_restarts", 10)),
            )
        if kind == "hyperband":
            if fidelity is None:
                raise RunConfigError("hyperband needs fidelity bounds", path="fidelity")
            return HyperbandTuner(
                space, seed=seed, eta=tuner_node.get("eta", 2), fid_upper=fidelity.upper
            )
        raise RunConfigError(f"tuner kind {kind!r} has no factory", path="tuner.kind")

    return factory


def irace_settings(tuner_node: dict) -> tuple[int, IRaceConfig]:
    budget = int(tuner_node["budget"])
    cfg = IRaceConfig(
        n_iter=int(tuner_node["n_iter"]) if tuner_node.get("n_iter") else None,
        t_first=int(tuner_node.get("t_first", 4)),
        t_each=int(tuner_node.get("t_each", 1)),
        alpha=float(tuner_node.get("alpha", 0.05)),
        test=str(tuner_node.get("test", "t")),
        elitist=bool(tuner_node.get("elitist", True)),
        n_min=int(tuner_node.get("n_min", 2)),
    )
    return budget, cfg
