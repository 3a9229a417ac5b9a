"""Objectives, per-instance aggregation and the evaluator backends.

The three objectives are correctness (share of instances whose tests pass),
performance gain of the patched code in percent, and agent wall-clock runtime
in seconds.  The first two are maximized and the last minimized; everything
downstream of this module works on the minimization form.
"""

from __future__ import annotations

import json
import math
import re
import subprocess
from dataclasses import dataclass, field
from fractions import Fraction
from importlib import resources
from pathlib import Path
from typing import Any, Mapping, Sequence

from .analysis.utest import significant_gain
from .search_space import Configuration, ConfigSpace, clamp_to_space, default_space

SIGNIFICANCE_ALPHA = 0.1
OK = "ok"
FAILED = "failed"


class EvaluationError(RuntimeError):
    """An evaluator could not produce results for a configuration."""


@dataclass(frozen=True)
class ObjectiveVector:
    correctness: float
    perf_gain: float
    runtime: float

    def minimization(self) -> tuple[float, float, float]:
        return (-self.correctness, -self.perf_gain, self.runtime)

    @classmethod
    def from_minimization(cls, vec: Sequence[float]) -> "ObjectiveVector":
        return cls(-vec[0], -vec[1], vec[2])

    def correctness_label(self, n_instances: int) -> str:
        """Render correctness as passed/total, e.g. ``4/9``."""
        if n_instances <= 0:
            return f"{self.correctness:.3f}"
        passed = Fraction(self.correctness).limit_denominator(n_instances) * n_instances
        return f"{round(float(passed))}/{n_instances}"

    def to_json(self) -> dict:
        return {"correctness": self.correctness, "perf_gain": self.perf_gain, "runtime": self.runtime}

    @classmethod
    def from_json(cls, data: Mapping) -> "ObjectiveVector":
        return cls(float(data["correctness"]), float(data["perf_gain"]), float(data["runtime"]))


@dataclass(frozen=True)
class InstanceResult:
    instance_id: str
    passed: bool
    agent_runtime: float | None = None
    base_runtimes: tuple[float, ...] | None = None
    patched_runtimes: tuple[float, ...] | None = None

    def __post_init__(self) -> None:
        if self.base_runtimes is not None:
            object.__setattr__(self, "base_runtimes", tuple(float(v) for v in self.base_runtimes))
        if self.patched_runtimes is not None:
            object.__setattr__(self, "patched_runtimes", tuple(float(v) for v in self.patched_runtimes))

    def check(self) -> None:
        """Raise EvaluationError if the measurement lists are malformed."""
        base, patched = self.base_runtimes, self.patched_runtimes
        if (base is None) != (patched is None):
            raise EvaluationError(f"invariant violation: {self.instance_id} has only one runtime list")
        if base is None:
            return
        if len(base) < 2 or len(patched) < 2:
            raise EvaluationError(f"invariant violation: runtime list < 2 for {self.instance_id}")
        if len(base) != len(patched):
            raise EvaluationError(f"invariant violation: runtime lists differ in length for {self.instance_id}")
        if min(base) <= 0 or min(patched) <= 0:
            raise EvaluationError(f"invariant violation: non-positive runtime for {self.instance_id}")

    def gain(self, alpha: float = SIGNIFICANCE_ALPHA) -> float:
        if not self.passed or self.base_runtimes is None:
            return 0.0
        return significant_gain(self.base_runtimes, self.patched_runtimes, alpha)

    def to_json(self) -> dict:
        data: dict[str, Any] = {"instance_id": self.instance_id, "passed": self.passed}
        if self.agent_runtime is not None:
            data["agent_runtime_s"] = self.agent_runtime
        if self.base_runtimes is not None:
            data["base_runtimes_s"] = list(self.base_runtimes)
            data["patched_runtimes_s"] = list(self.patched_runtimes)
        return data

    @classmethod
    def from_json(cls, data: Mapping) -> "InstanceResult":
        try:
            runtime = data.get("agent_runtime_s")
            return cls(
                instance_id=str(data["instance_id"]),
                passed=bool(data["passed"]),
                agent_runtime=None if runtime is None else float(runtime),
                base_runtimes=data.get("base_runtimes_s"),
                patched_runtimes=data.get("patched_runtimes_s"),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise EvaluationError(f"malformed instance result: {exc}") from exc


def aggregate(results: Sequence[InstanceResult], alpha: float = SIGNIFICANCE_ALPHA) -> ObjectiveVector:
    """Fold per-instance results into one objective vector.

    Gains are gated per instance (passed, significantly faster) and averaged
    over all instances, so failed instances pull the mean down.
    """
    if not results:
        raise EvaluationError("cannot aggregate zero instance results")
    for r in results:
        r.check()
        if r.agent_runtime is None:
            raise EvaluationError(f"{r.instance_id} has no agent runtime")
    n = len(results)
    correctness = sum(r.passed for r in results) / n
    gain = math.fsum(r.gain(alpha) for r in results) / n
    runtime = math.fsum(r.agent_runtime for r in results) / n
    return ObjectiveVector(correctness, gain, runtime)


@dataclass
class EvaluationRecord:
    configuration: Configuration
    objectives: ObjectiveVector
    per_instance: list[InstanceResult] = field(default_factory=list)
    generation: int = 0
    wall_time: float = 0.0
    status: str = OK
    evaluator: str = ""
    label: str | None = None
    error: str | None = None

    @property
    def id(self) -> str:
        return self.configuration.id

    @property
    def n_instances(self) -> int:
        return len(self.per_instance)

    def display_name(self) -> str:
        return self.label or self.id

    def to_json(self) -> dict:
        data: dict[str, Any] = {
            "configuration": self.configuration.to_json(),
            "objectives": self.objectives.to_json(),
            "per_instance": [r.to_json() for r in self.per_instance],
            "generation": self.generation,
            "wall_time": self.wall_time,
            "status": self.status,
            "evaluator": self.evaluator,
        }
        if self.label is not None:
            data["label"] = self.label
        if self.error is not None:
            data["error"] = self.error
        return data

    @classmethod
    def from_json(cls, data: Mapping, space: ConfigSpace | None = None) -> "EvaluationRecord":
        config = Configuration.from_json(data["configuration"], space)
        stored = data["configuration"].get("id")
        if stored is not None and stored != config.id:
            raise ValueError(f"configuration id mismatch: stored {stored}, computed {config.id}")
        return cls(
            configuration=config,
            objectives=ObjectiveVector.from_json(data["objectives"]),
            per_instance=[InstanceResult.from_json(r) for r in data.get("per_instance", [])],
            generation=int(data.get("generation", 0)),
            wall_time=float(data.get("wall_time", 0.0)),
            status=data.get("status", OK),
            evaluator=data.get("evaluator", ""),
            label=data.get("label"),
            error=data.get("error"),
        )


class Evaluator:
    """Turns a configuration plus a list of instance ids into measurements.

    Subclasses implement :meth:`evaluate`.  ``deterministic`` evaluators do not
    consume real time, so the optimizer records a zero wall time for them and
    their ledgers are reproducible byte for byte.
    """

    label = "evaluator"
    concurrent_safe = False
    deterministic = False

    def evaluate(self, config: Configuration, instances: Sequence[str]) -> list[InstanceResult]:
        raise NotImplementedError

    def score(self, config: Configuration, instances: Sequence[str]) -> tuple[ObjectiveVector, list[InstanceResult]]:
        results = self.evaluate(config, instances)
        return aggregate(results), results


# -- synthetic agent model ---------------------------------------------------

SYNTHETIC_MEASUREMENTS = 20
SYNTHETIC_BASE_RUNTIME = 10.0


def synthetic_quality(config: Configuration) -> float:
    """Latent solution quality of the synthetic agent; peaks at 12 for t=0.65, p=0.4, template 3."""
    v = config.values
    return (
        12.0
        - 40.0 * (v["temperature"] - 0.65) ** 2
        - 10.0 * (v["top_p"] - 0.4) ** 2
        - 0.5 * abs(v["prompt_template"] - 3)
    )


def synthetic_runtime(config: Configuration) -> float:
    v = config.values
    return 400.0 + 10.0 * v["step_limit"] + 5.0 * (v["env_timeout"] + v["llm_timeout"]) + 0.05 * v["max_tokens"]


def pass_threshold(index: int) -> float:
    return 2.0 + 0.8 * ((index * 7919) % 5)


def _instance_index(instance_id: str, position: int) -> int:
    m = re.search(r"(\d+)$", instance_id)
    return int(m.group(1)) if m else position


def _jitter(k: int) -> float:
    # +0.001, -0.002, +0.003, ... breaks ties so the rank test can engage
    return 0.001 * k * (1 if k % 2 else -1)


def synthetic_evaluate(
    config: Configuration, instances: Sequence[str], space: ConfigSpace | None = None
) -> list[InstanceResult]:
    """Closed-form stand-in for an agent run; pure and free of randomness.

    Instances whose id ends in an integer use it as their index (so held-out
    ids such as ``synthetic-10`` differ from training ids); others use their
    1-based position.
    """
    config = clamp_to_space(config, space or default_space())
    q = synthetic_quality(config)
    runtime = synthetic_runtime(config)
    base = tuple([SYNTHETIC_BASE_RUNTIME] * SYNTHETIC_MEASUREMENTS)
    results = []
    for position, instance_id in enumerate(instances, start=1):
        passed = q > pass_threshold(_instance_index(instance_id, position))
        gain = max(0.0, q) if passed else 0.0
        patched = tuple(
            SYNTHETIC_BASE_RUNTIME * (1 - gain / 100) + _jitter(k) for k in range(1, SYNTHETIC_MEASUREMENTS + 1)
        )
        results.append(InstanceResult(instance_id, passed, runtime, base, patched))
    return results


class SyntheticEvaluator(Evaluator):
    label = "synthetic"
    concurrent_safe = True
    deterministic = True

    def __init__(self, space: ConfigSpace | None = None):
        self.space = space or default_space()

    def evaluate(self, config, instances):
        return synthetic_evaluate(config, instances, self.space)


def default_instances(n: int = 9, prefix: str = "synthetic") -> list[str]:
    return [f"{prefix}-{i}" for i in range(1, n + 1)]


# -- replay traces -------------------------------------------------------------


@dataclass
class TraceRow:
    label: str
    configuration: Configuration
    results: list[InstanceResult]
    objectives: ObjectiveVector | None = None
    reference: dict = field(default_factory=dict)

    def score(self) -> ObjectiveVector:
        if self.objectives is not None:
            return self.objectives
        return aggregate(self.results)


class NotInTrace(EvaluationError):
    pass


@dataclass
class ReplayTrace:
    rows: list[TraceRow]

    def __post_init__(self) -> None:
        self._by_key: dict[str, TraceRow] = {}
        for row in self.rows:
            self._by_key[row.configuration.id] = row
            self._by_key[row.label] = row

    def lookup(self, key: Configuration | str) -> TraceRow:
        k = key.id if isinstance(key, Configuration) else key
        try:
            return self._by_key[k]
        except KeyError:
            raise NotInTrace(f"configuration {k} not in trace") from None

    def records(self, evaluator_label: str = "replay") -> list[EvaluationRecord]:
        return [
            EvaluationRecord(row.configuration, row.score(), list(row.results), 0, 0.0, OK, evaluator_label, row.label)
            for row in self.rows
        ]


def load_trace(path: str | Path, space: ConfigSpace | None = None) -> ReplayTrace:
    """Read a replay trace: a JSON array of ``{label, config, results[, objectives]}``."""
    space = space or default_space()
    with open(path, encoding="utf-8") as fh:
        data = json.load(fh)
    rows = []
    for entry in data:
        values = entry["config"]
        baseline = bool(entry.get("baseline", False))
        if isinstance(values, Mapping) and "values" in values:
            baseline = baseline or bool(values.get("baseline", False))
            values = values["values"]
        objectives = entry.get("objectives")
        rows.append(
            TraceRow(
                label=str(entry["label"]),
                configuration=space.configuration(values, baseline=baseline),
                results=[InstanceResult.from_json(r) for r in entry.get("results", [])],
                objectives=None if objectives is None else ObjectiveVector.from_json(objectives),
                reference=dict(entry.get("reference", {})),
            )
        )
    return ReplayTrace(rows)


def table2_path() -> Path:
    return Path(str(resources.files("agentmoo") / "data" / "table2.json"))


def load_table2(space: ConfigSpace | None = None) -> ReplayTrace:
    return load_trace(table2_path(), space)


def replay_evaluate(config: Configuration | str, trace: ReplayTrace) -> list[InstanceResult]:
    return list(trace.lookup(config).results)


class ReplayEvaluator(Evaluator):
    label = "replay"
    concurrent_safe = True
    deterministic = True

    def __init__(self, trace: ReplayTrace):
        self.trace = trace

    def evaluate(self, config, instances):
        return replay_evaluate(config, self.trace)

    def score(self, config, instances):
        row = self.trace.lookup(config)
        return row.score(), list(row.results)


# -- external command --------------------------------------------------------


def _parse_response(stdout: str) -> list[InstanceResult]:
    try:
        doc = json.loads(stdout)
    except json.JSONDecodeError as exc:
        raise EvaluationError(f"malformed JSON from evaluator: {exc}") from exc
    if not isinstance(doc, Mapping) or not isinstance(doc.get("results"), list):
        raise EvaluationError("malformed response: expected an object with a 'results' array")
    results = []
    for item in doc["results"]:
        if not isinstance(item, Mapping):
            raise EvaluationError("malformed response: result entries must be objects")
        for key in ("instance_id", "passed", "agent_runtime_s", "base_runtimes_s", "patched_runtimes_s"):
            if key not in item:
                raise EvaluationError(f"malformed response: result missing {key!r}")
        result = InstanceResult.from_json(item)
        result.check()
        if result.agent_runtime is None or result.agent_runtime <= 0:
            raise EvaluationError(f"invariant violation: agent runtime must be positive for {result.instance_id}")
        results.append(result)
    return results


def external_evaluate(
    config: Configuration, instances: Sequence[str], command: Sequence[str], timeout: float
) -> list[InstanceResult]:
    """Run ``command`` once, speaking the JSON stdin/stdout protocol."""
    if timeout <= 0:
        raise ValueError("timeout must be positive")
    request = json.dumps({"config": config.to_json(), "instances": list(instances)})
    try:
        proc = subprocess.run(
            list(command),
            input=request.encode("utf-8"),
            capture_output=True,
            timeout=timeout,
        )
    except subprocess.TimeoutExpired as exc:
        raise EvaluationError(f"timeout after {timeout:g}s") from exc
    except OSError as exc:
        raise EvaluationError(f"could not start evaluator: {exc}") from exc
    if proc.returncode != 0:
        tail = proc.stderr.decode("utf-8", "replace").strip()[-500:]
        raise EvaluationError(f"evaluator exited with status {proc.returncode}: {tail}")
    return _parse_response(proc.stdout.decode("utf-8"))


class ExternalEvaluator(Evaluator):
    label = "external"

    def __init__(self, command: Sequence[str], timeout: float = 4 * 3600.0, concurrent_safe: bool = False):
        if not command:
            raise ValueError("external evaluator needs a command")
        if timeout <= 0:
            raise ValueError("timeout must be positive")
        self.command = list(command)
        self.timeout = timeout
        self.concurrent_safe = concurrent_safe

    def evaluate(self, config, instances):
        return external_evaluate(config, instances, self.command, self.timeout)
