"""Typed hyperparameter space for coding-agent configurations.

Every configuration has two faces: a mapping of named, typed values and a
genome in the unit hypercube.  The variation operators only ever see the
genome; :func:`decode` turns it back into something an agent harness can run.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from typing import Any, Iterable, Mapping, Sequence

import numpy as np

CONTINUOUS = "continuous"
INTEGER = "integer"
CATEGORICAL = "categorical"
KINDS = (CONTINUOUS, INTEGER, CATEGORICAL)


class SpaceError(ValueError):
    """Raised for malformed spaces, genomes or configurations."""


@dataclass(frozen=True)
class ParamSpec:
    name: str
    kind: str
    lower: float = 0.0
    upper: float = 0.0
    categories: tuple = ()
    unit: str = ""

    def __post_init__(self) -> None:
        if self.kind not in KINDS:
            raise SpaceError(f"{self.name}: unknown kind {self.kind!r}")
        if self.kind == CATEGORICAL:
            if not self.categories:
                raise SpaceError(f"{self.name}: categorical parameter needs categories")
            object.__setattr__(self, "categories", tuple(self.categories))
            return
        if self.lower > self.upper:
            raise SpaceError(f"{self.name}: lower bound {self.lower} exceeds upper {self.upper}")
        if self.kind == INTEGER and (self.lower != int(self.lower) or self.upper != int(self.upper)):
            raise SpaceError(f"{self.name}: integer bounds must be whole numbers")
        # canonical bound types keep the fingerprint stable across JSON round-trips
        cast = int if self.kind == INTEGER else float
        object.__setattr__(self, "lower", cast(self.lower))
        object.__setattr__(self, "upper", cast(self.upper))

    @property
    def span(self) -> float:
        return self.upper - self.lower

    def coerce(self, value: Any) -> Any:
        """Cast a raw (e.g. JSON-loaded) value to this parameter's kind."""
        if value is None:
            return None
        if self.kind == CONTINUOUS:
            return float(value)
        if self.kind == INTEGER:
            if isinstance(value, float) and not value.is_integer():
                raise SpaceError(f"{self.name}: expected an integer, got {value!r}")
            return int(value)
        for label in self.categories:
            if value == label or str(value) == str(label):
                return label
        return value

    def to_json(self) -> dict:
        return {
            "name": self.name,
            "kind": self.kind,
            "lower": self.lower if self.kind != CATEGORICAL else None,
            "upper": self.upper if self.kind != CATEGORICAL else None,
            "categories": list(self.categories) if self.kind == CATEGORICAL else None,
            "unit": self.unit,
        }

    @classmethod
    def from_json(cls, data: Mapping) -> "ParamSpec":
        kind = data["kind"]
        if kind == CATEGORICAL:
            return cls(data["name"], kind, categories=tuple(data["categories"]), unit=data.get("unit", ""))
        return cls(data["name"], kind, float(data["lower"]), float(data["upper"]), unit=data.get("unit", ""))


def _render(value: Any) -> str:
    # continuous values get 6 fractional digits so ids survive float noise
    if isinstance(value, bool) or value is None:
        return json.dumps(value)
    if isinstance(value, float):
        return f"{value:.6f}"
    if isinstance(value, int):
        return str(value)
    return json.dumps(value)


def config_id(values: Mapping[str, Any]) -> str:
    """64-bit content hash of the ordered values, as 16 hex digits."""
    canonical = ";".join(f"{name}={_render(value)}" for name, value in values.items())
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()[:16]


@dataclass(frozen=True)
class Configuration:
    """One assignment of every hyperparameter.

    ``baseline`` marks hand-written defaults that are allowed to sit outside
    the box bounds (they are compared against, never sampled).
    """

    values: Mapping[str, Any]
    baseline: bool = False
    id: str = field(init=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "values", dict(self.values))
        object.__setattr__(self, "id", config_id(self.values))

    def __getitem__(self, name: str) -> Any:
        return self.values[name]

    def __hash__(self) -> int:
        return hash(self.id)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Configuration):
            return NotImplemented
        return self.id == other.id

    def to_json(self) -> dict:
        data = {"id": self.id, "values": dict(self.values)}
        if self.baseline:
            data["baseline"] = True
        return data

    @classmethod
    def from_json(cls, data: Mapping, space: "ConfigSpace | None" = None) -> "Configuration":
        baseline = bool(data.get("baseline", False))
        values = data["values"] if "values" in data else data
        if space is not None:
            return space.configuration(values, baseline=baseline)
        return cls(values, baseline=baseline)


@dataclass
class ValidationResult:
    ok: bool
    violations: list[str] = field(default_factory=list)

    def __bool__(self) -> bool:
        return self.ok


@dataclass(frozen=True)
class ConfigSpace:
    params: tuple[ParamSpec, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "params", tuple(self.params))
        names = [p.name for p in self.params]
        dupes = sorted({n for n in names if names.count(n) > 1})
        if dupes:
            raise SpaceError(f"duplicate parameter names: {', '.join(dupes)}")

    @property
    def n_vars(self) -> int:
        return len(self.params)

    @property
    def names(self) -> list[str]:
        return [p.name for p in self.params]

    def __getitem__(self, name: str) -> ParamSpec:
        for p in self.params:
            if p.name == name:
                return p
        raise KeyError(name)

    def __iter__(self):
        return iter(self.params)

    def configuration(self, values: Mapping[str, Any], baseline: bool = False) -> Configuration:
        """Build a Configuration with values cast to each parameter's kind and ordered by the space.

        Unknown names are kept at the end so validation can report them.
        """
        ordered = {p.name: p.coerce(values[p.name]) for p in self.params if p.name in values}
        ordered.update({k: v for k, v in values.items() if k not in ordered})
        return Configuration(ordered, baseline=baseline)

    def to_json(self) -> list[dict]:
        return [p.to_json() for p in self.params]

    @classmethod
    def from_json(cls, data: Iterable[Mapping]) -> "ConfigSpace":
        return cls(tuple(ParamSpec.from_json(d) for d in data))

    def fingerprint(self) -> str:
        blob = json.dumps(self.to_json(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode("utf-8")).hexdigest()[:16]


def default_space() -> ConfigSpace:
    """The eight tunables of the agent: LLM sampling, agent limits, prompt template."""
    return ConfigSpace(
        (
            ParamSpec("temperature", CONTINUOUS, 0.0, 1.0),
            ParamSpec("top_p", CONTINUOUS, 0.1, 1.0),
            ParamSpec("max_tokens", INTEGER, 512, 4096, unit="tokens"),
            ParamSpec("step_limit", INTEGER, 10, 40, unit="steps"),
            ParamSpec("cost_limit", CONTINUOUS, 3.0, 10.0, unit="dollars"),
            ParamSpec("env_timeout", INTEGER, 40, 60, unit="seconds"),
            ParamSpec("llm_timeout", INTEGER, 40, 60, unit="seconds"),
            ParamSpec("prompt_template", CATEGORICAL, categories=(1, 2, 3)),
        )
    )


def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def _check_genome(genome: Sequence[float], space: ConfigSpace) -> np.ndarray:
    g = np.asarray(genome, dtype=float)
    if g.ndim != 1 or g.shape[0] != space.n_vars:
        raise SpaceError(f"genome has {g.size} genes, space has {space.n_vars} parameters")
    if np.any(~np.isfinite(g)) or np.any(g < 0.0) or np.any(g > 1.0):
        raise SpaceError("genes must lie in [0, 1]")
    return g


def decode(genome: Sequence[float], space: ConfigSpace) -> Configuration:
    g = _check_genome(genome, space)
    values: dict[str, Any] = {}
    for gene, p in zip(g, space.params):
        gene = float(gene)
        if p.kind == CONTINUOUS:
            values[p.name] = p.lower + gene * p.span
        elif p.kind == INTEGER:
            v = _round_half_up(p.lower + gene * p.span)
            values[p.name] = int(min(max(v, int(p.lower)), int(p.upper)))
        else:
            k = len(p.categories)
            values[p.name] = p.categories[min(int(math.floor(gene * k)), k - 1)]
    return Configuration(values)


def _integer_gene(v: int, p: ParamSpec) -> float:
    if p.span == 0:
        return 0.5
    # bucket of v is [v - 0.5, v + 0.5) in value space, truncated at the bounds
    lo = max(v - 0.5, p.lower)
    hi = min(v + 0.5, p.upper)
    return ((lo + hi) / 2 - p.lower) / p.span


def encode(config: Configuration, space: ConfigSpace) -> np.ndarray:
    genes = np.empty(space.n_vars)
    for i, p in enumerate(space.params):
        if p.name not in config.values:
            raise SpaceError(f"missing parameter {p.name}")
        v = config.values[p.name]
        if p.kind == CATEGORICAL:
            if v not in p.categories:
                raise SpaceError(f"{p.name}: {v!r} is not one of {list(p.categories)}")
            genes[i] = (p.categories.index(v) + 0.5) / len(p.categories)
            continue
        if v is None or not (p.lower <= v <= p.upper):
            raise SpaceError(f"{p.name}: {v!r} outside [{p.lower}, {p.upper}]")
        if p.kind == INTEGER:
            genes[i] = _integer_gene(int(v), p)
        else:
            genes[i] = 0.0 if p.span == 0 else (v - p.lower) / p.span
    return genes


def validate(config: Configuration, space: ConfigSpace, baseline: bool | None = None) -> ValidationResult:
    """Check a configuration against the space; problems are returned, not raised.

    In baseline mode (explicit, or taken from ``config.baseline``) out-of-range
    and unset values are reported but do not make the result fail.  Missing
    parameters and wrong kinds always fail.
    """
    if baseline is None:
        baseline = config.baseline
    hard: list[str] = []
    soft: list[str] = []
    for p in space.params:
        if p.name not in config.values:
            hard.append(f"{p.name}: missing param")
            continue
        v = config.values[p.name]
        if v is None:
            soft.append(f"{p.name}: not set")
        elif p.kind == CATEGORICAL:
            if v not in p.categories:
                soft.append(f"{p.name} out of range: {v!r} not in {list(p.categories)}")
        elif isinstance(v, bool) or not isinstance(v, (int, float)):
            hard.append(f"{p.name}: wrong kind, expected {p.kind} number, got {type(v).__name__}")
        elif p.kind == INTEGER and not float(v).is_integer():
            hard.append(f"{p.name}: wrong kind, expected integer, got {v!r}")
        elif not (p.lower <= v <= p.upper):
            soft.append(f"{p.name} out of range: {v} not in [{p.lower:g}, {p.upper:g}]")
    for name in config.values:
        if name not in space.names:
            hard.append(f"{name}: unknown param")
    violations = hard + soft
    ok = not hard and (baseline or not soft)
    return ValidationResult(ok, violations)


def clamp_to_space(config: Configuration, space: ConfigSpace) -> Configuration:
    """Project a (baseline) configuration into the box; unset categoricals take the first label."""
    values: dict[str, Any] = {}
    for p in space.params:
        v = config.values.get(p.name)
        if p.kind == CATEGORICAL:
            values[p.name] = v if v in p.categories else p.categories[0]
        elif v is None:
            values[p.name] = p.coerce(p.lower)
        else:
            values[p.name] = p.coerce(min(max(v, p.lower), p.upper))
    return Configuration(values)


def random_genome(space: ConfigSpace, rng: np.random.Generator) -> np.ndarray:
    return rng.random(space.n_vars)


def random_config(space: ConfigSpace, rng: np.random.Generator) -> Configuration:
    return decode(random_genome(space, rng), space)
