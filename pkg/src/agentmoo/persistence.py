"""Append-only run ledger (line-delimited JSON).

Line 1 is a header describing the run; every further line is one complete
evaluation record.  A line without its terminating newline is a write that
was cut short and is ignored on load (and dropped before new appends).
"""

from __future__ import annotations

import json
import logging
import os
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Mapping

from . import __version__
from .evaluation import EvaluationRecord
from .search_space import ConfigSpace, default_space

FORMAT_VERSION = 1
RNG_SCHEME = "numpy SeedSequence(entropy=master_seed, spawn_key=(generation,))"

log = logging.getLogger(__name__)


class LedgerError(RuntimeError):
    pass


def _dumps(obj: Any) -> str:
    return json.dumps(obj, ensure_ascii=False, separators=(",", ":"))


def make_header(
    space: ConfigSpace,
    ga_params: Mapping | None,
    evaluator: str,
    instances: list[str] | None = None,
    created_at: str | None = None,
) -> dict:
    seed = None if ga_params is None else ga_params.get("seed")
    return {
        "format_version": FORMAT_VERSION,
        "space": space.to_json(),
        "space_hash": space.fingerprint(),
        "ga_params": None if ga_params is None else dict(ga_params),
        "evaluator": evaluator,
        "instances": list(instances or []),
        "rng": {"master_seed": seed, "streams": RNG_SCHEME},
        "artifact_version": __version__,
        "created_at": created_at or datetime.now(timezone.utc).isoformat(timespec="seconds"),
    }


@dataclass
class RunLedger:
    path: Path
    header: dict
    records: list[EvaluationRecord] = field(default_factory=list)
    ignored_partial_lines: int = 0

    def __post_init__(self) -> None:
        self.path = Path(self.path)
        self._ids = {r.id for r in self.records}

    @property
    def space(self) -> ConfigSpace:
        return ConfigSpace.from_json(self.header["space"])

    @classmethod
    def create(cls, path: str | Path, header: Mapping, overwrite: bool = False) -> "RunLedger":
        path = Path(path)
        if path.exists() and not overwrite:
            raise LedgerError(f"{path} already exists")
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w", encoding="utf-8", newline="\n") as fh:
            fh.write(_dumps(dict(header)) + "\n")
            fh.flush()
            os.fsync(fh.fileno())
        return cls(path, dict(header))

    def __contains__(self, config_id: str) -> bool:
        return config_id in self._ids

    def __len__(self) -> int:
        return len(self.records)

    def append(self, record: EvaluationRecord) -> None:
        if record.id in self._ids:
            raise LedgerError(f"duplicate configuration id {record.id}")
        line = _dumps(record.to_json()) + "\n"
        with self.path.open("a", encoding="utf-8", newline="\n") as fh:
            fh.write(line)
            fh.flush()
            os.fsync(fh.fileno())
        self.records.append(record)
        self._ids.add(record.id)

    def drop_partial_tail(self) -> None:
        """Truncate an unterminated trailing line so appends start on a clean line."""
        if not self.ignored_partial_lines:
            return
        data = self.path.read_bytes()
        cut = data.rfind(b"\n") + 1
        with self.path.open("r+b") as fh:
            fh.truncate(cut)
        self.ignored_partial_lines = 0


def append_record(ledger: RunLedger, record: EvaluationRecord) -> None:
    ledger.append(record)


def load_ledger(
    path: str | Path, expected_space: ConfigSpace | None = None, strict: bool = True
) -> RunLedger:
    """Load header and complete records.

    A space that differs from ``expected_space`` is fatal when ``strict``
    (resuming) and only logged otherwise (analysis).
    """
    path = Path(path)
    try:
        data = path.read_bytes()
    except OSError as exc:
        raise LedgerError(f"cannot read ledger {path}: {exc}") from exc
    lines = data.split(b"\n")
    # everything after the last newline is an unterminated (partial) line
    tail = lines.pop()
    partial = 1 if tail.strip() else 0
    if not lines:
        raise LedgerError(f"{path}: missing header")
    try:
        header = json.loads(lines[0].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise LedgerError(f"{path}: corrupt header: {exc}") from exc
    if not isinstance(header, dict) or header.get("format_version") != FORMAT_VERSION:
        raise LedgerError(f"{path}: not a version {FORMAT_VERSION} ledger header")
    space = ConfigSpace.from_json(header["space"]) if header.get("space") else default_space()
    if expected_space is not None and expected_space.fingerprint() != space.fingerprint():
        if strict:
            raise LedgerError(f"{path}: ledger space does not match the expected space")
        log.warning("%s: ledger space differs from the expected space", path)
    records = []
    ids = set()
    for lineno, raw in enumerate(lines[1:], start=2):
        if not raw.strip():
            continue
        try:
            record = EvaluationRecord.from_json(json.loads(raw.decode("utf-8")), space)
        except (UnicodeDecodeError, json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
            raise LedgerError(f"{path}:{lineno}: corrupt record: {exc}") from exc
        if record.id in ids:
            raise LedgerError(f"{path}:{lineno}: duplicate configuration id {record.id}")
        ids.add(record.id)
        records.append(record)
    return RunLedger(path, header, records, partial)


@dataclass
class ResumeState:
    next_generation: int
    cache: dict[str, EvaluationRecord]
    complete: bool


def _comparable(params: Mapping) -> dict:
    return json.loads(json.dumps(dict(params)))


def check_params(ledger: RunLedger, ga_params: Mapping, instances: list[str] | None = None) -> None:
    stored = ledger.header.get("ga_params")
    if stored is None or _comparable(stored) != _comparable(ga_params):
        raise LedgerError(f"parameter mismatch: ledger has {stored}, run has {dict(ga_params)}")
    if instances is not None and list(ledger.header.get("instances", [])) != list(instances):
        raise LedgerError("parameter mismatch: ledger was recorded on a different instance list")


def resume_state(ledger: RunLedger, ga_params, instances: list[str] | None = None) -> ResumeState:
    """Rebuild the evaluation cache and find the first generation with unevaluated offspring.

    The offspring of each generation are recomputed from the master seed and
    looked up in the cache; no evaluator is called.
    """
    from .evolution import GAParams, replay_progress

    params = ga_params if isinstance(ga_params, GAParams) else GAParams.from_json(ga_params)
    space = ledger.space
    check_params(ledger, params.to_json(space.n_vars), instances)
    cache = {r.id: r for r in ledger.records}
    next_gen = replay_progress(space, params, cache)
    return ResumeState(next_gen, cache, next_gen > params.generations)
