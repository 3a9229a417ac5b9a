"""Command-line front end.

Every option can also come from an environment variable (``AGENTMOO_`` plus
the option name in upper case, dashes as underscores) or from a JSON
manifest given with ``--manifest``.  Precedence: flag > environment >
manifest > built-in default.

Exit codes: 0 success, 2 usage or input error, 3 evaluator/environment error.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import shlex
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Sequence

from . import __version__
from .analysis.forest import ForestParams
from .analysis.importance import OBJECTIVE_NAMES, importance_report, importance_table, importance_csv, usable_records
from .analysis.utest import mann_whitney_u, significant_gain
from .evaluation import (
    OK,
    EvaluationRecord,
    Evaluator,
    ExternalEvaluator,
    ReplayEvaluator,
    SyntheticEvaluator,
    default_instances,
    load_trace,
)
from .evolution import GAParams, evaluate_configuration, run_nsga2
from .metrics import (
    DEFAULT_REFERENCE,
    dominates,
    format_table,
    front_csv,
    normalize,
    objective_bounds,
    pareto_front,
    per_record_hypervolume,
    hypervolume3,
    table_rows,
)
from .persistence import LedgerError, RunLedger, load_ledger, make_header
from .search_space import Configuration, ConfigSpace, default_space, validate

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_ENV = 3
ENV_PREFIX = "AGENTMOO_"
BASELINE_LABELS = ("default", "baseline")

log = logging.getLogger("agentmoo")


class UsageError(Exception):
    pass


class EnvironmentFailure(Exception):
    pass


@dataclass
class RunManifest:
    space: ConfigSpace
    evaluator: Evaluator
    instances: list[str]
    ga_params: GAParams
    ledger: Path
    report_dir: Path | None = None
    baseline: Configuration | None = None
    parallel_evals: int = 1
    extra: dict = field(default_factory=dict)


# -- option resolution ---------------------------------------------------------


def _manifest(args) -> dict:
    path = getattr(args, "manifest", None) or os.environ.get(ENV_PREFIX + "MANIFEST")
    if not path:
        return {}
    try:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
    except OSError as exc:
        raise UsageError(f"cannot read manifest {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise UsageError(f"manifest {path} is not valid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise UsageError("manifest must be a JSON object")
    return data


def setting(args, name: str, default: Any = None, cast=None) -> Any:
    """Resolve one option: flag, then environment, then manifest, then default."""
    value = getattr(args, name, None)
    if value is None:
        value = os.environ.get(ENV_PREFIX + name.upper())
    if value is None:
        value = args._manifest_data.get(name, args._manifest_data.get(name.replace("_", "-")))
    if value is None:
        return default
    if cast is not None:
        try:
            return cast(value)
        except (TypeError, ValueError) as exc:
            raise UsageError(f"invalid value for {name}: {value!r}") from exc
    return value


def _flag(value) -> bool:
    if isinstance(value, str):
        return value.strip().lower() in ("1", "true", "yes", "on")
    return bool(value)


def _parse_instances(value) -> list[str]:
    if isinstance(value, list):
        items = [str(v) for v in value]
    else:
        text = str(value).strip()
        if text.isdigit():
            return default_instances(int(text))
        items = [s.strip() for s in text.split(",") if s.strip()]
    return items


def _parse_floats(text: str, n: int | None = None) -> list[float]:
    parts = [p for p in str(text).replace(";", ",").split(",") if p.strip()]
    values = [float(p) for p in parts]
    if n is not None and len(values) != n:
        raise ValueError(f"expected {n} numbers")
    return values


def _parse_bounds(value) -> list[tuple[float, float]]:
    # "c_lo,c_hi,g_lo,g_hi,r_lo,r_hi" (semicolons allowed as separators)
    if isinstance(value, list):
        flat = [float(v) for pair in value for v in (pair if isinstance(pair, list) else [pair])]
    else:
        flat = _parse_floats(value)
    if len(flat) != 6:
        raise ValueError("bounds need 6 numbers: correctness lo,hi; perf lo,hi; runtime lo,hi")
    pairs = [(flat[i], flat[i + 1]) for i in range(0, 6, 2)]
    if any(lo > hi for lo, hi in pairs):
        raise ValueError("each bound must satisfy lo <= hi")
    return pairs


def load_space(args) -> ConfigSpace:
    path = setting(args, "space")
    if not path:
        return default_space()
    try:
        with open(path, encoding="utf-8") as fh:
            return ConfigSpace.from_json(json.load(fh))
    except (OSError, json.JSONDecodeError, KeyError, ValueError) as exc:
        raise UsageError(f"cannot load space {path}: {exc}") from exc


def load_config_file(path: str, space: ConfigSpace, baseline: bool = False) -> Configuration:
    try:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot load configuration {path}: {exc}") from exc
    values = data.get("values", data) if isinstance(data, dict) else None
    if not isinstance(values, dict):
        raise UsageError(f"{path}: expected a JSON object of parameter values")
    config = space.configuration(values, baseline=baseline or bool(data.get("baseline", False)))
    result = validate(config, space)
    if not result.ok:
        raise UsageError(f"{path}: invalid configuration: {'; '.join(result.violations)}")
    return config


def build_evaluator(args, space: ConfigSpace) -> Evaluator:
    choice = setting(args, "evaluator", "synthetic")
    trace = setting(args, "trace")
    command = setting(args, "command")
    if ":" in choice:
        choice, _, rest = choice.partition(":")
        if choice == "replay":
            trace = trace or rest
        elif choice == "external":
            command = command or rest
    if choice == "synthetic":
        return SyntheticEvaluator(space)
    if choice == "replay":
        if not trace:
            raise UsageError("replay evaluator needs --trace")
        try:
            return ReplayEvaluator(load_trace(trace, space))
        except OSError as exc:
            raise EnvironmentFailure(f"cannot read trace {trace}: {exc}") from exc
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
            raise EnvironmentFailure(f"malformed trace {trace}: {exc}") from exc
    if choice == "external":
        if not command:
            raise UsageError("external evaluator needs --command")
        argv = shlex.split(command) if isinstance(command, str) else list(command)
        timeout = setting(args, "timeout", 4 * 3600.0, float)
        concurrent = setting(args, "concurrent_safe", False, _flag)
        try:
            return ExternalEvaluator(argv, timeout, concurrent)
        except ValueError as exc:
            raise UsageError(str(exc)) from exc
    raise UsageError(f"unknown evaluator {choice!r} (synthetic, replay, external)")


def ga_params(args) -> GAParams:
    try:
        return GAParams(
            population_size=setting(args, "pop", 5, int),
            generations=setting(args, "gens", 5, int),
            seed=setting(args, "seed", 42, int),
            crossover_probability=setting(args, "crossover_prob", 0.9, float),
            crossover_eta=setting(args, "crossover_eta", 15.0, float),
            mutation_probability=setting(args, "mutation_prob", None, float),
            mutation_eta=setting(args, "mutation_eta", 20.0, float),
            penalty_runtime=setting(args, "penalty_runtime", 3600.0, float),
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from exc


def build_manifest(args) -> RunManifest:
    space = load_space(args)
    instances = setting(args, "instances", None, _parse_instances)
    if instances is None:
        instances = default_instances()
    if not instances:
        raise UsageError("instance list is empty")
    params = ga_params(args)
    evaluator = build_evaluator(args, space)
    ledger = Path(setting(args, "ledger", "ledger.jsonl"))
    report_dir = setting(args, "report_dir")
    baseline_path = setting(args, "baseline")
    baseline = load_config_file(baseline_path, space, baseline=True) if baseline_path else None
    parallel = setting(args, "parallel_evals", 1, int)
    if parallel < 1:
        raise UsageError("--parallel-evals must be at least 1")
    return RunManifest(
        space, evaluator, instances, params, ledger, Path(report_dir) if report_dir else None, baseline, parallel
    )


# -- output helpers ----------------------------------------------------------


def emit(args, human: str, payload: dict) -> None:
    if getattr(args, "json", False):
        print(json.dumps(payload, indent=2))
    else:
        print(human)


def _open_ledger(path) -> RunLedger:
    try:
        return load_ledger(path, strict=False)
    except LedgerError as exc:
        raise UsageError(str(exc)) from exc


def _record_payload(rec: EvaluationRecord, hv: float | None = None) -> dict:
    data = {
        "config": rec.display_name(),
        "id": rec.id,
        "values": dict(rec.configuration.values),
        "objectives": rec.objectives.to_json(),
        "correctness_label": rec.objectives.correctness_label(rec.n_instances),
        "status": rec.status,
        "generation": rec.generation,
    }
    if hv is not None:
        data["hv_percent"] = hv
    return data


def find_baseline(records: Sequence[EvaluationRecord], label: str | None = None) -> EvaluationRecord | None:
    wanted = (label,) if label else BASELINE_LABELS
    for rec in records:
        if rec.label in wanted or (label is None and rec.configuration.baseline):
            return rec
    return None


# -- commands ------------------------------------------------------------------


def cmd_optimize(args) -> int:
    manifest = build_manifest(args)
    space, params = manifest.space, manifest.ga_params
    header = make_header(
        space, params.to_json(space.n_vars), manifest.evaluator.label, manifest.instances, os.environ.get("AGENTMOO_CREATED_AT")
    )
    try:
        if manifest.ledger.exists():
            ledger = load_ledger(manifest.ledger, expected_space=space, strict=True)
            log.info("resuming from %s (%d records)", manifest.ledger, len(ledger))
        else:
            ledger = RunLedger.create(manifest.ledger, header)
    except LedgerError as exc:
        raise UsageError(str(exc)) from exc

    def progress(generation, archive):
        if not args.json:
            print(f"generation {generation}: {len(archive)} configurations evaluated", file=sys.stderr)

    try:
        result = run_nsga2(
            space, manifest.evaluator, params, ledger, manifest.instances, manifest.parallel_evals, on_generation=progress
        )
    except LedgerError as exc:
        raise UsageError(str(exc)) from exc

    members = list(result.pareto.members)
    baseline_rec = None
    if manifest.baseline is not None:
        baseline_rec = evaluate_configuration(manifest.evaluator, manifest.baseline, manifest.instances, -1, params)
        baseline_rec.label = "baseline"
    shown = members + ([baseline_rec] if baseline_rec else [])
    bounds = objective_bounds([r.objectives for r in result.all_records + ([baseline_rec] if baseline_rec else [])])
    hv = per_record_hypervolume(shown, bounds)
    hv_lines = [f"  gen {g}: {v:.2f}%" for g, v in enumerate(result.per_generation_hypervolume)]
    human = "\n".join(
        [
            f"evaluations: {result.evaluations} ({result.new_evaluations} new), ledger: {manifest.ledger}",
            "cumulative hypervolume per generation:",
            *hv_lines,
            "",
            f"Pareto front ({len(members)} of {result.evaluations}):",
            format_table(table_rows(shown, hv, len(manifest.instances))),
        ]
    )
    payload = {
        "evaluations": result.evaluations,
        "new_evaluations": result.new_evaluations,
        "ledger": str(manifest.ledger),
        "per_generation_hypervolume": result.per_generation_hypervolume,
        "hv_bounds": [list(b) for b in result.hv_bounds],
        "pareto": [_record_payload(r, h) for r, h in zip(shown, hv)],
    }
    if manifest.report_dir is not None:
        manifest.report_dir.mkdir(parents=True, exist_ok=True)
        (manifest.report_dir / "pareto.csv").write_text(front_csv(shown, hv), encoding="utf-8")
        (manifest.report_dir / "summary.json").write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")
    emit(args, human, payload)
    return EXIT_OK


def cmd_pareto(args) -> int:
    ledger = _open_ledger(args.ledger_path)
    if not ledger.records:
        raise UsageError("ledger has no records")
    front = pareto_front(ledger.records)
    bounds = objective_bounds([r.objectives for r in ledger.records])
    hv = per_record_hypervolume(front.members, bounds)
    baseline = find_baseline(ledger.records, setting(args, "baseline_label"))
    rows = table_rows(front.members, hv)
    payload_members = []
    for rec, row, h in zip(front.members, rows, hv):
        item = _record_payload(rec, h)
        if baseline is not None and rec is not baseline:
            better = sum(
                x < y for x, y in zip(rec.objectives.minimization(), baseline.objectives.minimization())
            )
            item["dominates_baseline"] = dominates(rec.objectives, baseline.objectives)
            item["objectives_better_than_baseline"] = better
            row["vs baseline"] = f"{'dominates' if item['dominates_baseline'] else '-'} ({better}/3 better)"
        payload_members.append(item)
    lines = [f"Pareto front: {len(front)} of {front.extracted_from} records", format_table(rows)]
    if front.duplicates:
        lines.append(
            "duplicates of front members (identical objectives): "
            + ", ".join(r.display_name() for r in front.duplicates)
        )
    if baseline is not None:
        n_dom = sum(dominates(r.objectives, baseline.objectives) for r in front.members if r is not baseline)
        lines.append(f"{n_dom} of {len(front)} members dominate baseline {baseline.display_name()}")
    payload = {
        "members": payload_members,
        "duplicates": [_record_payload(r) for r in front.duplicates],
        "extracted_from": front.extracted_from,
        "baseline": None if baseline is None else baseline.display_name(),
    }
    if setting(args, "csv"):
        Path(setting(args, "csv")).write_text(front_csv(front.members, hv), encoding="utf-8")
    emit(args, "\n".join(lines), payload)
    return EXIT_OK


def _select(records: Sequence[EvaluationRecord], selector: str) -> list[EvaluationRecord]:
    if selector in ("all", ""):
        return list(records)
    if selector == "front":
        return pareto_front(records).members
    kind, _, rest = selector.partition(":")
    keys = {k.strip() for k in rest.split(",") if k.strip()}
    if kind == "labels":
        return [r for r in records if r.label in keys]
    if kind == "ids":
        return [r for r in records if r.id in keys]
    if kind == "generation":
        return [r for r in records if r.generation <= int(rest)]
    raise UsageError(f"unknown selector {selector!r} (all, front, labels:a,b, ids:x,y, generation:N)")


def cmd_hypervolume(args) -> int:
    ledger = _open_ledger(args.ledger_path)
    selected = _select(ledger.records, setting(args, "select", "all"))
    if not selected:
        raise UsageError("empty selection")
    reference = setting(args, "reference", list(DEFAULT_REFERENCE), lambda v: _parse_floats(v, 3) if isinstance(v, str) else [float(x) for x in v])
    bounds = setting(args, "bounds", None, _parse_bounds)
    if bounds is None:
        source = ledger.records if setting(args, "bounds_from", "ledger") == "ledger" else selected
        bounds = objective_bounds([r.objectives for r in source])
    points, used = normalize([r.objectives for r in selected], bounds)
    try:
        report = hypervolume3(points, reference, used)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    lines = [
        f"selected records: {len(selected)}",
        f"reference point: {tuple(reference)}",
        "normalization bounds (natural units):",
        *(f"  {name}: [{lo:g}, {hi:g}]" for name, (lo, hi) in zip(OBJECTIVE_NAMES, used)),
        f"hypervolume: {report.raw_volume:.6f} ({report.percent:.2f}%)",
        f"convention: {report.convention}",
    ]
    emit(args, "\n".join(lines), report.to_json())
    return EXIT_OK


def cmd_importance(args) -> int:
    ledger = _open_ledger(args.ledger_path)
    space = ledger.space
    records = usable_records(ledger.records)
    if len(records) < 2:
        raise UsageError(f"too few records: {len(records)} usable, need at least 2")
    objective = setting(args, "objective", "all")
    objectives = OBJECTIVE_NAMES if objective == "all" else (objective,)
    if any(o not in OBJECTIVE_NAMES for o in objectives):
        raise UsageError(f"unknown objective {objective!r}")
    params = ForestParams(
        n_trees=setting(args, "trees", 200, int),
        max_features=setting(args, "max_features", None, int),
        min_samples_leaf=setting(args, "min_samples_leaf", 1, int),
        seed=setting(args, "forest_seed", 0, int),
    )
    reports = [importance_report(records, o, space, params) for o in objectives]
    for rep in reports:
        if rep.constant_target:
            print(f"warning: {rep.objective} is constant across records; importances are zero", file=sys.stderr)
    if setting(args, "csv"):
        Path(setting(args, "csv")).write_text(importance_csv(reports, space), encoding="utf-8")
    human = "\n".join(
        [
            f"{reports[0].method}, {len(records)} records, forest {reports[0].forest_params}",
            format_table(importance_table(reports, space)),
        ]
    )
    emit(args, human, {"reports": [r.to_json() for r in reports]})
    return EXIT_OK


def _read_samples(path: str) -> list[float]:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc}") from exc
    try:
        data = json.loads(text)
        values = [float(v) for v in data]
    except (json.JSONDecodeError, TypeError, ValueError):
        try:
            values = [float(v) for v in text.replace(",", " ").split()]
        except ValueError as exc:
            raise UsageError(f"{path}: expected numbers") from exc
    if not values:
        raise UsageError(f"{path}: empty sample")
    return values


def cmd_significance(args) -> int:
    base = _read_samples(args.base)
    patched = _read_samples(args.patched)
    alpha = setting(args, "alpha", 0.1, float)
    result = mann_whitney_u(base, patched)
    gain = significant_gain(base, patched, alpha) if len(base) >= 2 and len(patched) >= 2 else 0.0
    payload = {**result.to_json(), "alpha": alpha, "significant": result.p_value < alpha, "gain_percent": gain}
    human = (
        f"U = {result.u_statistic:g}, p = {result.p_value:.6g} ({result.method}, n1={result.n1}, n2={result.n2})\n"
        f"significant at alpha={alpha:g}: {'yes' if payload['significant'] else 'no'}; credited gain: {gain:.2f}%"
    )
    emit(args, human, payload)
    return EXIT_OK


def cmd_validate(args) -> int:
    ledger = _open_ledger(args.ledger_path)
    space = ledger.space
    instances = setting(args, "instances", None, _parse_instances)
    if not instances:
        raise UsageError("validate needs a non-empty held-out --instances list")
    evaluator = build_evaluator(args, space)
    params = GAParams(penalty_runtime=setting(args, "penalty_runtime", 3600.0, float))
    if not ledger.records:
        raise UsageError("ledger has no records")
    front = pareto_front(ledger.records)
    baseline = find_baseline(ledger.records, setting(args, "baseline_label"))
    baseline_path = setting(args, "baseline")
    if baseline_path:
        cfg = load_config_file(baseline_path, space, baseline=True)
        baseline = EvaluationRecord(cfg, front.members[0].objectives, label="baseline")
    targets = [r for r in front.members if r is not baseline]
    if baseline is not None:
        targets.append(baseline)
    validated = []
    for rec in targets:
        out = evaluate_configuration(evaluator, rec.configuration, instances, rec.generation, params)
        out.label = rec.label or ("baseline" if rec is baseline else None)
        validated.append(out)
    bounds = objective_bounds([r.objectives for r in validated])
    vhv = per_record_hypervolume(validated, bounds)
    members = [r for r in validated if r.label != "baseline" and not r.configuration.baseline]
    front_report = hypervolume3(normalize([r.objectives for r in members], bounds)[0], DEFAULT_REFERENCE, bounds) if members else None
    rows = table_rows(validated, vhv, len(instances))
    for row in rows:
        row["VHV (%)"] = row.pop("HV (%)")
    failed = [r.display_name() for r in validated if r.status != OK]
    lines = [f"validation on {len(instances)} held-out instances", format_table(rows)]
    if front_report is not None:
        lines.append(f"front validation hypervolume: {front_report.percent:.2f}%")
    if failed:
        lines.append("failed evaluations: " + ", ".join(failed))
    payload = {
        "instances": instances,
        "bounds": [list(b) for b in bounds],
        "records": [_record_payload(r, h) for r, h in zip(validated, vhv)],
        "front_vhv_percent": None if front_report is None else front_report.percent,
    }
    emit(args, "\n".join(lines), payload)
    return EXIT_OK


def cmd_evaluate(args) -> int:
    space = load_space(args)
    if not setting(args, "config"):
        raise UsageError("evaluate needs --config")
    config = load_config_file(setting(args, "config"), space)
    instances = setting(args, "instances", None, _parse_instances) or default_instances()
    evaluator = build_evaluator(args, space)
    record = evaluate_configuration(evaluator, config, instances, 0, ga_params(args))
    if record.status != OK:
        print(f"evaluation failed: {record.error}", file=sys.stderr)
        emit(args, "", _record_payload(record))
        return EXIT_ENV
    human = format_table(table_rows([record], None, len(instances)))
    emit(args, human, {**_record_payload(record), "per_instance": [r.to_json() for r in record.per_instance]})
    return EXIT_OK


def cmd_import_trace(args) -> int:
    space = load_space(args)
    try:
        trace = load_trace(args.trace_path, space)
    except OSError as exc:
        raise EnvironmentFailure(f"cannot read trace {args.trace_path}: {exc}") from exc
    instances = sorted({r.instance_id for row in trace.rows for r in row.results})
    header = make_header(space, None, "replay", instances, os.environ.get("AGENTMOO_CREATED_AT"))
    try:
        ledger = RunLedger.create(args.out, header, overwrite=args.force)
        for rec in trace.records():
            ledger.append(rec)
    except LedgerError as exc:
        raise UsageError(str(exc)) from exc
    print(f"wrote {len(ledger)} records to {args.out}")
    return EXIT_OK


# -- parser --------------------------------------------------------------------


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--json", action="store_true", default=None, help="machine-readable output")
    p.add_argument("--manifest", help="JSON file with option defaults")
    p.add_argument("--space", help="JSON space file (default: built-in agent space)")


def _add_evaluator(p: argparse.ArgumentParser) -> None:
    p.add_argument("--evaluator", help="synthetic | replay[:trace] | external[:command]")
    p.add_argument("--trace", help="replay trace JSON")
    p.add_argument("--command", help="external evaluator command line")
    p.add_argument("--timeout", type=float, help="external evaluator timeout in seconds")
    p.add_argument("--instances", help="comma-separated instance ids, or a count")
    p.add_argument("--penalty-runtime", dest="penalty_runtime", type=float)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="agentmoo", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"agentmoo {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command_name", required=True)

    p = sub.add_parser("optimize", help="run NSGA-II and write a ledger")
    _add_common(p)
    _add_evaluator(p)
    p.add_argument("--pop", type=int)
    p.add_argument("--gens", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--crossover-prob", dest="crossover_prob", type=float)
    p.add_argument("--crossover-eta", dest="crossover_eta", type=float)
    p.add_argument("--mutation-prob", dest="mutation_prob", type=float)
    p.add_argument("--mutation-eta", dest="mutation_eta", type=float)
    p.add_argument("--ledger")
    p.add_argument("--report-dir", dest="report_dir")
    p.add_argument("--baseline", help="JSON config file of an (out-of-space) baseline to compare against")
    p.add_argument("--parallel-evals", dest="parallel_evals", type=int)
    p.set_defaults(func=cmd_optimize)

    p = sub.add_parser("pareto", help="non-dominated records of a ledger")
    _add_common(p)
    p.add_argument("ledger_path")
    p.add_argument("--baseline-label", dest="baseline_label")
    p.add_argument("--csv", help="also write the front as CSV")
    p.set_defaults(func=cmd_pareto)

    p = sub.add_parser("hypervolume", help="normalized hypervolume of ledger records")
    _add_common(p)
    p.add_argument("ledger_path")
    p.add_argument("--select", help="all | front | labels:a,b | ids:x,y | generation:N")
    p.add_argument("--reference", help="reference point, e.g. -0.1,-0.1,-0.1")
    p.add_argument("--bounds", help="c_lo,c_hi,g_lo,g_hi,r_lo,r_hi in natural units")
    p.add_argument("--bounds-from", dest="bounds_from", choices=("ledger", "selection"))
    p.set_defaults(func=cmd_hypervolume)

    p = sub.add_parser("importance", help="forest feature importance per objective")
    _add_common(p)
    p.add_argument("ledger_path")
    p.add_argument("--objective", choices=("all",) + OBJECTIVE_NAMES)
    p.add_argument("--trees", type=int)
    p.add_argument("--max-features", dest="max_features", type=int)
    p.add_argument("--min-samples-leaf", dest="min_samples_leaf", type=int)
    p.add_argument("--forest-seed", dest="forest_seed", type=int)
    p.add_argument("--csv", help="also write the table as CSV")
    p.set_defaults(func=cmd_importance)

    p = sub.add_parser("significance", help="Mann-Whitney U test on two sample files")
    _add_common(p)
    p.add_argument("base")
    p.add_argument("patched")
    p.add_argument("--alpha", type=float)
    p.set_defaults(func=cmd_significance)

    p = sub.add_parser("validate", help="re-evaluate the front on held-out instances")
    _add_common(p)
    _add_evaluator(p)
    p.add_argument("ledger_path")
    p.add_argument("--baseline", help="JSON config file of the baseline")
    p.add_argument("--baseline-label", dest="baseline_label")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("evaluate", help="evaluate one configuration")
    _add_common(p)
    _add_evaluator(p)
    p.add_argument("--config", help="JSON configuration file")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("import-trace", help="write a replay trace out as a ledger")
    _add_common(p)
    p.add_argument("trace_path")
    p.add_argument("out")
    p.add_argument("--force", action="store_true")
    p.set_defaults(func=cmd_import_trace)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        args._manifest_data = _manifest(args)
        if getattr(args, "json", None) is None:
            args.json = setting(args, "json", False, _flag)
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except EnvironmentFailure as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ENV


if __name__ == "__main__":
    sys.exit(main())
