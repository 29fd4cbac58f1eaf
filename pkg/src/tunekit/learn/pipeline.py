"""Linear and branching pipelines over preprocessing ops and learners.

A pipeline is itself a learner: its search space is the product of its
nodes' spaces with node-name prefixes, and a branch node contributes one
categorical choice parameter whose levels name the branches. Parameters of
a non-chosen branch are conditional on that choice and therefore inactive.
"""

from __future__ import annotations

import numpy as np

from ..data import Dataset, PredictionMatrix
from ..errors import SpaceError, TrainingError
from ..space import Condition, ParamSpec, SearchSpace
from .base import Capabilities, Learner, Model
from .preprocess import OP_REGISTRY, Preprocessor


class Branch:
    """Exclusive choice between named sub-learners, routed by one categorical HP."""

    def __init__(self, name: str, choices: dict[str, Learner]):
        if len(choices) < 2:
            raise SpaceError("branch needs at least two choices")
        self.name = name
        self.choices = dict(choices)


def _prefixed_specs(prefix: str, space: SearchSpace | None, condition=None) -> list[ParamSpec]:
    if space is None:
        return []
    out = []
    for s in space.specs:
        cond = s.condition
        if cond is not None:
            cond = Condition(parent=f"{prefix}{cond.parent}", allowed=cond.allowed)
        elif condition is not None:
            cond = condition
        out.append(
            ParamSpec(
                name=f"{prefix}{s.name}",
                kind=s.kind,
                lower=s.lower,
                upper=s.upper,
                levels=s.levels,
                trafo=s.trafo,
                condition=cond,
            )
        )
    return out


class Pipeline(Learner):
    """Ordered nodes: preprocessing ops, at most one branch, a terminal learner."""

    def __init__(self, nodes: list[tuple[str, object]], pipeline_id: str | None = None):
        if not nodes:
            raise SpaceError("pipeline needs at least one node")
        names = [n for n, _ in nodes]
        if len(set(names)) != len(names):
            raise SpaceError("duplicate pipeline node names")
        terminal = nodes[-1][1]
        if not isinstance(terminal, (Learner, Branch)):
            raise SpaceError("pipeline must end in a learner or branch")
        for _, node in nodes[:-1]:
            if not isinstance(node, Preprocessor):
                raise SpaceError("only the terminal pipeline node may be a learner/branch")
        self.nodes = list(nodes)
        self.id = pipeline_id or "pipe:" + "+".join(names)
        self.capabilities = self._combined_capabilities()

    def _terminal_learners(self) -> list[Learner]:
        terminal = self.nodes[-1][1]
        if isinstance(terminal, Branch):
            return list(terminal.choices.values())
        return [terminal]

    def _combined_capabilities(self) -> Capabilities:
        op_ids = {node.id for _, node in self.nodes[:-1] if isinstance(node, Preprocessor)}
        tasks: set[str] = None  # type: ignore[assignment]
        for lrn in self._terminal_learners():
            tasks = set(lrn.capabilities.tasks) if tasks is None else tasks & set(
                lrn.capabilities.tasks
            )
        return Capabilities(
            tasks=tuple(sorted(tasks)),
            handles_missing="impute" in op_ids,
            handles_categorical="onehot" in op_ids,
        )

    def space_preset(self) -> SearchSpace:
        specs: list[ParamSpec] = []
        for name, node in self.nodes:
            if isinstance(node, Preprocessor):
                specs.extend(_prefixed_specs(f"{name}.", node.space_preset()))
            elif isinstance(node, Branch):
                levels = tuple(sorted(node.choices))
                specs.append(ParamSpec(name, "categorical", levels=levels))
                for level in levels:
                    cond = Condition(parent=name, allowed=(level,))
                    specs.extend(
                        _prefixed_specs(f"{level}.", node.choices[level].space_preset(), cond)
                    )
            else:
                specs.extend(_prefixed_specs(f"{name}.", node.space_preset()))
        return SearchSpace(specs)

    def default_params(self) -> dict:
        params: dict = {}
        for name, node in self.nodes:
            if isinstance(node, Preprocessor):
                params.update({f"{name}.{k}": v for k, v in node.default_params().items()})
            elif isinstance(node, Branch):
                first = sorted(node.choices)[0]
                params[name] = first
                params.update(
                    {f"{first}.{k}": v for k, v in node.choices[first].default_params().items()}
                )
            else:
                params.update({f"{name}.{k}": v for k, v in node.default_params().items()})
        return params

    def _node_params(self, prefix: str, params: dict) -> dict:
        plen = len(prefix) + 1
        return {k[plen:]: v for k, v in params.items() if k.startswith(prefix + ".")}

    def train(self, data: Dataset, params: dict, rng: np.random.Generator) -> "PipelineModel":
        params = dict(params or {})
        fitted_ops = []
        flowing = data
        for i, (name, node) in enumerate(self.nodes[:-1]):
            node_rng = np.random.default_rng(rng.integers(2**63))
            merged = dict(node.default_params())
            merged.update(self._node_params(name, params))
            op = node.fit(flowing, merged, node_rng)
            flowing = op.transform(flowing)
            fitted_ops.append(op)
        term_name, terminal = self.nodes[-1]
        if isinstance(terminal, Branch):
            choice = params.get(term_name)
            if choice is None:
                choice = sorted(terminal.choices)[0]
            if choice not in terminal.choices:
                raise TrainingError(f"branch {term_name!r} has no choice {choice!r}")
            learner = terminal.choices[choice]
            sub = self._node_params(choice, params)
        else:
            choice = None
            learner = terminal
            sub = self._node_params(term_name, params)
        model = learner.train(flowing, sub, rng)
        return PipelineModel(self.id, fitted_ops, model, choice, data.n)

    # Pipeline.train does the full routing; _fit is never reached.
    def _fit(self, data, params, rng):  # pragma: no cover
        raise NotImplementedError


class PipelineModel(Model):
    def __init__(self, learner_id, fitted_ops, model, branch_choice, n_train):
        super().__init__(learner_id, n_train)
        self.fitted_ops = fitted_ops
        self.model = model
        self.branch_choice = branch_choice

    def predict(self, data: Dataset) -> PredictionMatrix:
        flowing = data
        for op in self.fitted_ops:
            if op.train_only:
                continue
            flowing = op.transform(flowing)
        return self.model.predict(flowing)


def pipeline_from_id(pipeline_id: str) -> Pipeline:
    """Build a pipeline from an id string.

    ``pipe:impute+standardize+knn`` chains ops before a terminal learner;
    ``branch:elastic_net|knn`` selects between learners via one categorical.
    A branch may terminate a pipe: ``pipe:standardize+branch:knn|cart``.
    """
    from .base import _REGISTRY

    def make_terminal(token: str):
        if token.startswith("branch:"):
            ids = token[len("branch:") :].split("|")
            if len(ids) < 2 or any(not i for i in ids):
                raise SpaceError(f"malformed branch id {token!r}")
            return Branch("branch", {i: _REGISTRY[i]() for i in ids})
        if token in _REGISTRY:
            return _REGISTRY[token]()
        raise SpaceError(f"unknown learner {token!r} in pipeline id")

    if pipeline_id.startswith("branch:"):
        terminal = make_terminal(pipeline_id)
        return Pipeline([("branch", terminal)], pipeline_id=pipeline_id)
    if not pipeline_id.startswith("pipe:"):
        raise SpaceError(f"malformed pipeline id {pipeline_id!r}")
    body = pipeline_id[len("pipe:") :]
    tokens = body.split("+")
    nodes: list[tuple[str, object]] = []
    for tok in tokens[:-1]:
        if tok not in OP_REGISTRY:
            raise SpaceError(f"unknown preprocessing op {tok!r} in pipeline id")
        nodes.append((tok, OP_REGISTRY[tok]()))
    term = make_terminal(tokens[-1])
    nodes.append((tokens[-1] if not isinstance(term, Branch) else "branch", term))
    return Pipeline(nodes, pipeline_id=pipeline_id)
