"""Mixed, hierarchical hyperparameter search spaces.

A :class:`SearchSpace` is an ordered list of :class:`ParamSpec` entries.
Numeric parameters live on the *tuner scale* (the raw bounds given in the
spec); an optional monotone transformation (``exp``, ``exp_floor``, ``pow2``,
``pow10``) is applied only when a configuration is handed to a learner.
Parameters may be conditional on a categorical parent; a parameter is active
iff its whole condition chain is satisfied.

A :class:`Config` stores tuner-scale values for the *active* parameters only.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Callable, Iterator, Mapping, Sequence

import numpy as np
import yaml

from .errors import InvalidConfigError, SpaceError

KINDS = ("real", "integer", "categorical")

TRAFOS: dict[str, Callable[[float], Any]] = {
    "none": lambda x: x,
    "exp": math.exp,
    # epsilon guards the floor against exp(log(n)) landing just below n
    "exp_floor": lambda x: int(math.floor(math.exp(x) + 1e-10)),
    "pow2": lambda x: 2.0**x,
    "pow10": lambda x: 10.0**x,
}


@dataclass(frozen=True)
class Condition:
    """Single-parent activation rule: active iff parent's value is in ``allowed``."""

    parent: str
    allowed: tuple

    def __post_init__(self):
        if not isinstance(self.allowed, tuple):
            object.__setattr__(self, "allowed", tuple(self.allowed))
        if len(self.allowed) == 0:
            raise SpaceError(f"condition on {self.parent!r} allows no values")


@dataclass(frozen=True)
class ParamSpec:
    """One hyperparameter: its kind, domain, transformation and condition.

    ``lower``/``upper`` apply to real and integer kinds and are expressed on
    the tuner scale. Integer kinds take the integer lattice inside the bounds.
    ``levels`` is the ordered value list for categorical kinds.
    """

    name: str
    kind: str
    lower: float | None = None
    upper: float | None = None
    levels: tuple | None = None
    trafo: str = "none"
    condition: Condition | None = None

    def __post_init__(self):
        if not self.name or not isinstance(self.name, str):
            raise SpaceError(f"invalid parameter name: {self.name!r}")
        if self.kind not in KINDS:
            raise SpaceError(f"{self.name}: unknown kind {self.kind!r}")
        if self.trafo not in TRAFOS:
            raise SpaceError(f"{self.name}: unknown trafo {self.trafo!r}")
        if self.kind == "categorical":
            if self.levels is None:
                raise SpaceError(f"{self.name}: categorical spec needs levels")
            if not isinstance(self.levels, tuple):
                object.__setattr__(self, "levels", tuple(self.levels))
            if len(self.levels) < 2 or len(set(self.levels)) != len(self.levels):
                raise SpaceError(f"{self.name}: needs >= 2 distinct levels")
            if self.lower is not None or self.upper is not None:
                raise SpaceError(f"{self.name}: categorical spec takes no bounds")
            if self.trafo != "none":
                raise SpaceError(f"{self.name}: categorical spec takes no trafo")
        else:
            if self.levels is not None:
                raise SpaceError(f"{self.name}: numeric spec takes no levels")
            if self.lower is None or self.upper is None:
                raise SpaceError(f"{self.name}: numeric spec needs bounds")
            object.__setattr__(self, "lower", float(self.lower))
            object.__setattr__(self, "upper", float(self.upper))
            if not self.lower < self.upper:
                raise SpaceError(f"{self.name}: lower must be < upper")
            if self.kind == "integer" and self.int_upper - self.int_lower < 1:
                raise SpaceError(f"{self.name}: integer range holds < 2 values")

    # Integer lattice inside possibly fractional bounds.
    @property
    def int_lower(self) -> int:
        return int(math.ceil(self.lower))

    @property
    def int_upper(self) -> int:
        return int(math.floor(self.upper))

    @property
    def is_conditional(self) -> bool:
        return self.condition is not None

    def transform(self, value):
        """Map a tuner-scale value to the learner-scale value."""
        if self.kind == "categorical":
            return value
        out = TRAFOS[self.trafo](float(value))
        if self.kind == "integer" and self.trafo == "none":
            return int(round(out))
        return out

    def contains(self, value) -> bool:
        if self.kind == "categorical":
            return value in self.levels
        try:
            v = float(value)
        except (TypeError, ValueError):
            return False
        if not (self.lower <= v <= self.upper):
            return False
        if self.kind == "integer":
            return float(v).is_integer()
        return True


class SearchSpace:
    """Ordered collection of parameter specs with a tree of conditions."""

    def __init__(self, specs: Sequence[ParamSpec]):
        specs = tuple(specs)
        if not specs:
            raise SpaceError("search space needs at least one parameter")
        names = [s.name for s in specs]
        if len(set(names)) != len(names):
            raise SpaceError("duplicate parameter names")
        self.specs = specs
        self._by_name = {s.name: s for s in specs}
        self._check_conditions()
        self._topo = self._topological_order()

    def _check_conditions(self):
        for s in self.specs:
            if s.condition is None:
                continue
            parent = self._by_name.get(s.condition.parent)
            if parent is None:
                raise SpaceError(f"{s.name}: condition parent {s.condition.parent!r} not in space")
            if parent.kind != "categorical":
                raise SpaceError(f"{s.name}: condition parent must be categorical")
            bad = [v for v in s.condition.allowed if v not in parent.levels]
            if bad:
                raise SpaceError(f"{s.name}: condition values {bad} not levels of {parent.name}")
        # single-parent chains: a cycle would revisit a name while walking up
        for s in self.specs:
            seen = {s.name}
            cur = s
            while cur.condition is not None:
                nxt = cur.condition.parent
                if nxt in seen:
                    raise SpaceError(f"condition cycle through {nxt!r}")
                seen.add(nxt)
                cur = self._by_name[nxt]

    def _topological_order(self) -> tuple[str, ...]:
        order: list[str] = []
        placed: set[str] = set()

        def place(spec: ParamSpec):
            if spec.name in placed:
                return
            if spec.condition is not None:
                place(self._by_name[spec.condition.parent])
            placed.add(spec.name)
            order.append(spec.name)

        for s in self.specs:
            place(s)
        return tuple(order)

    @property
    def dim(self) -> int:
        return len(self.specs)

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(s.name for s in self.specs)

    def __getitem__(self, name: str) -> ParamSpec:
        return self._by_name[name]

    def __contains__(self, name: str) -> bool:
        return name in self._by_name

    def __iter__(self) -> Iterator[ParamSpec]:
        return iter(self.specs)

    def __eq__(self, other) -> bool:
        return isinstance(other, SearchSpace) and self.specs == other.specs

    def __repr__(self) -> str:
        return f"SearchSpace({', '.join(self.names)})"

    def is_active(self, name: str, values: Mapping) -> bool:
        """Whether ``name`` is active under the (possibly partial) assignment."""
        spec = self._by_name[name]
        while spec.condition is not None:
            cond = spec.condition
            if values.get(cond.parent) not in cond.allowed:
                return False
            spec = self._by_name[cond.parent]
        return True

    def active_names(self, values: Mapping) -> list[str]:
        return [n for n in self.names if self.is_active(n, values)]

    def canonicalize(self, values: Mapping) -> "Config":
        """Drop entries that are inactive under the assignment itself."""
        kept = {n: values[n] for n in self.names if n in values and self.is_active(n, values)}
        return Config(kept)

    def compatible_with(self, other: "SearchSpace") -> bool:
        """Same names, kinds and domains (used by warm starts)."""
        return self.specs == other.specs


@dataclass(frozen=True)
class Config:
    """Concrete configuration: tuner-scale values for the active parameters."""

    values: dict

    def __post_init__(self):
        object.__setattr__(self, "values", dict(self.values))

    def canonical(self) -> tuple:
        return tuple(sorted(self.values.items(), key=lambda kv: kv[0]))

    def __eq__(self, other) -> bool:
        return isinstance(other, Config) and self.canonical() == other.canonical()

    def __hash__(self) -> int:
        return hash(self.canonical())

    def __contains__(self, name: str) -> bool:
        return name in self.values

    def __getitem__(self, name: str):
        return self.values[name]

    def get(self, name: str, default=None):
        return self.values.get(name, default)

    def transformed(self, space: SearchSpace) -> dict:
        """Learner-scale view: every active value passed through its trafo."""
        return {n: space[n].transform(v) for n, v in self.values.items()}

    def __repr__(self) -> str:
        inner = ", ".join(f"{k}={v!r}" for k, v in self.canonical())
        return f"Config({inner})"


@dataclass
class Verdict:
    """Validation result: ``ok`` plus a list of human-readable violations."""

    ok: bool
    violations: list[str] = field(default_factory=list)

    def __bool__(self) -> bool:
        return self.ok


def validate(space: SearchSpace, cfg: Config | Mapping) -> Verdict:
    """Check one configuration against a space.

    Reports unknown names, missing active parameters, present inactive
    parameters, and out-of-domain values.
    """
    values = cfg.values if isinstance(cfg, Config) else dict(cfg)
    violations: list[str] = []
    for name in values:
        if name not in space:
            violations.append(f"unknown parameter {name!r}")
    known = {n: v for n, v in values.items() if n in space}
    for spec in space:
        active = space.is_active(spec.name, known)
        present = spec.name in known
        if active and not present:
            violations.append(f"{spec.name} required (condition satisfied) but missing")
        elif not active and present:
            violations.append(f"{spec.name} inactive (condition unmet) but present")
        elif present and not spec.contains(known[spec.name]):
            violations.append(f"{spec.name}={known[spec.name]!r} outside domain")
    return Verdict(not violations, violations)


def sample_uniform(space: SearchSpace, rng: np.random.Generator) -> Config:
    """Draw a valid configuration uniformly, parents before children."""
    values: dict = {}
    for name in space._topo:
        spec = space[name]
        if not space.is_active(name, values):
            continue
        if spec.kind == "real":
            values[name] = float(rng.uniform(spec.lower, spec.upper))
        elif spec.kind == "integer":
            values[name] = int(rng.integers(spec.int_lower, spec.int_upper + 1))
        else:
            values[name] = spec.levels[int(rng.integers(len(spec.levels)))]
    return Config({n: values[n] for n in space.names if n in values})


def _grid_values(spec: ParamSpec, resolution: int) -> list:
    if spec.kind == "categorical":
        return list(spec.levels)
    if spec.kind == "real":
        if resolution < 2:
            raise SpaceError(f"{spec.name}: grid resolution must be >= 2 for real parameters")
        return [float(v) for v in np.linspace(spec.lower, spec.upper, resolution)]
    lo, hi = spec.int_lower, spec.int_upper
    pts = np.linspace(lo, hi, min(resolution, hi - lo + 1))
    vals: list[int] = []
    for p in pts:
        v = int(round(p))
        if v not in vals:  # rounding may collide; keep first occurrence
            vals.append(v)
    return vals


def grid(space: SearchSpace, resolution: int) -> list[Config]:
    """Full-factorial grid with ``resolution`` points per numeric parameter.

    Real parameters get equidistant points including both bounds. On
    hierarchical spaces the unconditional product is generated, entries are
    canonicalized (inactive values dropped) and duplicates removed, keeping
    first occurrences.
    """
    if resolution < 1:
        raise SpaceError("grid resolution must be positive")
    per_spec = [_grid_values(s, resolution) for s in space.specs]
    configs: list[Config] = []
    seen: set = set()
    idx = [0] * len(per_spec)
    while True:
        combo = {s.name: per_spec[i][idx[i]] for i, s in enumerate(space.specs)}
        cfg = space.canonicalize(combo)
        if cfg not in seen:
            seen.add(cfg)
            configs.append(cfg)
        # odometer over the cartesian product, last spec fastest
        j = len(per_spec) - 1
        while j >= 0:
            idx[j] += 1
            if idx[j] < len(per_spec[j]):
                break
            idx[j] = 0
            j -= 1
        if j < 0:
            return configs


def encoded_dim(space: SearchSpace) -> int:
    total = 0
    for spec in space:
        total += len(spec.levels) if spec.kind == "categorical" else 1
        if spec.is_conditional:
            total += 1
    return total


def encode_numeric(space: SearchSpace, cfg: Config) -> np.ndarray:
    """Fixed-length numeric embedding of a configuration.

    Numerics are min-max scaled to [0, 1] on the tuner scale, categoricals
    one-hot coded. Inactive conditional parameters are imputed (midpoint or
    first level) and every conditional spec contributes a 0/1 activity
    indicator, so the layout is identical for every valid configuration.
    """
    verdict = validate(space, cfg)
    if not verdict.ok:
        raise InvalidConfigError("; ".join(verdict.violations))
    out: list[float] = []
    for spec in space:
        active = spec.name in cfg
        if spec.kind == "categorical":
            level = cfg[spec.name] if active else spec.levels[0]
            pos = spec.levels.index(level)
            out.extend(1.0 if i == pos else 0.0 for i in range(len(spec.levels)))
        else:
            if active:
                lo = spec.lower
                v = (float(cfg[spec.name]) - lo) / (spec.upper - lo)
            else:
                v = 0.5
            out.append(v)
        if spec.is_conditional:
            out.append(1.0 if active else 0.0)
    return np.asarray(out, dtype=float)


# ---------------------------------------------------------------------------
# serialization

def spec_to_dict(spec: ParamSpec) -> dict:
    d: dict = {"name": spec.name, "kind": spec.kind}
    if spec.kind == "categorical":
        d["levels"] = list(spec.levels)
    else:
        d["lower"] = spec.lower
        d["upper"] = spec.upper
    if spec.trafo != "none":
        d["trafo"] = spec.trafo
    if spec.condition is not None:
        d["condition"] = {"parent": spec.condition.parent, "allowed": list(spec.condition.allowed)}
    return d


def spec_from_dict(d: Mapping) -> ParamSpec:
    cond = None
    if d.get("condition") is not None:
        c = d["condition"]
        cond = Condition(parent=c["parent"], allowed=tuple(c["allowed"]))
    levels = d.get("levels")
    return ParamSpec(
        name=d["name"],
        kind=d["kind"],
        lower=d.get("lower"),
        upper=d.get("upper"),
        levels=tuple(levels) if levels is not None else None,
        trafo=d.get("trafo", "none"),
        condition=cond,
    )


def space_to_dict(space: SearchSpace) -> list[dict]:
    return [spec_to_dict(s) for s in space.specs]


def space_from_dict(entries: Sequence[Mapping]) -> SearchSpace:
    return SearchSpace([spec_from_dict(e) for e in entries])


def space_to_yaml(space: SearchSpace) -> str:
    return yaml.safe_dump(space_to_dict(space), sort_keys=False)


def space_from_yaml(text: str) -> SearchSpace:
    data = yaml.safe_load(text)
    if not isinstance(data, list):
        raise SpaceError("space document must be a list of parameter entries")
    return space_from_dict(data)
