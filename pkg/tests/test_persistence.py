import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from agentmoo.evaluation import (
    FAILED,
    EvaluationRecord,
    ObjectiveVector,
    SyntheticEvaluator,
    aggregate,
    default_instances,
    synthetic_evaluate,
)
from agentmoo.evolution import GAParams, failed_record, run_nsga2
from agentmoo.persistence import LedgerError, RunLedger, append_record, load_ledger, make_header, resume_state
from agentmoo.search_space import ConfigSpace, ParamSpec, default_space, random_config

PARAMS = GAParams(seed=42)


def new_ledger(path, space, params=PARAMS):
    header = make_header(space, params.to_json(space.n_vars), "synthetic", default_instances(), created_at="t0")
    return RunLedger.create(path, header)


def synthetic_record(space, seed, generation=0):
    import numpy as np

    config = random_config(space, np.random.default_rng(seed))
    results = synthetic_evaluate(config, default_instances())
    return EvaluationRecord(config, aggregate(results), results, generation, 0.0, "ok", "synthetic")


class Killed(BaseException):
    """Stands in for SIGKILL: not an Exception, so the optimizer cannot swallow it."""


class DiesAfter(SyntheticEvaluator):
    def __init__(self, space, budget):
        super().__init__(space)
        self.budget = budget

    def evaluate(self, config, instances):
        if self.budget == 0:
            raise Killed()
        self.budget -= 1
        return super().evaluate(config, instances)


@pytest.fixture
def full_run(space, tmp_path):
    path = tmp_path / "full.jsonl"
    result = run_nsga2(space, SyntheticEvaluator(space), PARAMS, ledger=new_ledger(path, space), instances=default_instances())
    return path, result


# -- append / load ---------------------------------------------------------------


def test_round_trip(space, tmp_path):
    ledger = new_ledger(tmp_path / "l.jsonl", space)
    recs = [synthetic_record(space, s, generation=s) for s in range(4)]
    recs.append(failed_record(random_config(space, __import__("numpy").random.default_rng(99)), PARAMS, 4, "synthetic", "boom"))
    for r in recs:
        append_record(ledger, r)
    loaded = load_ledger(tmp_path / "l.jsonl", space)
    assert [r.to_json() for r in loaded.records] == [r.to_json() for r in recs]
    assert loaded.records[-1].status == FAILED and loaded.records[-1].error == "boom"
    assert loaded.header == ledger.header
    assert loaded.ignored_partial_lines == 0


@settings(max_examples=30, deadline=None)
@given(st.lists(st.integers(0, 10**6), min_size=0, max_size=12, unique=True))
def test_round_trip_property(tmp_path_factory, seeds):
    space = default_space()
    path = tmp_path_factory.mktemp("ledger") / "l.jsonl"
    ledger = new_ledger(path, space)
    kept = []
    for s in seeds:
        rec = synthetic_record(space, s)
        if rec.id in ledger:
            continue
        ledger.append(rec)
        kept.append(rec)
    loaded = load_ledger(path, space)
    assert [r.to_json() for r in loaded.records] == [r.to_json() for r in kept]


def test_duplicate_rejected(space, tmp_path):
    ledger = new_ledger(tmp_path / "l.jsonl", space)
    rec = synthetic_record(space, 1)
    ledger.append(rec)
    with pytest.raises(LedgerError, match="duplicate"):
        ledger.append(rec)
    assert len(load_ledger(tmp_path / "l.jsonl").records) == 1


def test_create_refuses_overwrite(space, tmp_path):
    new_ledger(tmp_path / "l.jsonl", space)
    with pytest.raises(LedgerError):
        new_ledger(tmp_path / "l.jsonl", space)


def test_full_run_has_expected_records(full_run):
    path, result = full_run
    loaded = load_ledger(path)
    assert len(loaded.records) == result.evaluations
    lines = path.read_text().splitlines()
    assert json.loads(lines[0])["format_version"] == 1
    assert len(lines) == 1 + result.evaluations


def test_truncated_mid_record(full_run, tmp_path):
    path, result = full_run
    data = path.read_bytes()
    cut = tmp_path / "cut.jsonl"
    cut.write_bytes(data[: len(data) - 40])
    loaded = load_ledger(cut)
    assert len(loaded.records) == result.evaluations - 1
    assert loaded.ignored_partial_lines == 1


def test_empty_file(tmp_path):
    p = tmp_path / "empty.jsonl"
    p.write_bytes(b"")
    with pytest.raises(LedgerError, match="header"):
        load_ledger(p)


def test_corrupt_header(tmp_path):
    p = tmp_path / "bad.jsonl"
    p.write_text("{not json\n")
    with pytest.raises(LedgerError, match="header"):
        load_ledger(p)


def test_corrupt_middle_record(full_run, tmp_path):
    path, _ = full_run
    lines = path.read_text().splitlines(keepends=True)
    lines[3] = "garbage\n"
    bad = tmp_path / "bad.jsonl"
    bad.write_text("".join(lines))
    with pytest.raises(LedgerError, match=":4: corrupt record"):
        load_ledger(bad)


def test_space_mismatch(full_run):
    path, _ = full_run
    other = ConfigSpace((ParamSpec("x", "continuous", 0.0, 1.0),))
    with pytest.raises(LedgerError, match="space"):
        load_ledger(path, other, strict=True)
    assert len(load_ledger(path, other, strict=False).records) > 0


# -- resume ----------------------------------------------------------------------


def test_resume_complete_is_noop(space, full_run):
    path, result = full_run
    before = path.read_bytes()
    ledger = load_ledger(path, space)
    state = resume_state(ledger, PARAMS, default_instances())
    assert state.complete and state.next_generation == PARAMS.generations + 1
    again = run_nsga2(space, DiesAfter(space, 0), PARAMS, ledger=ledger, instances=default_instances())
    assert again.new_evaluations == 0
    assert path.read_bytes() == before


def test_resume_after_generation_two(space, full_run, tmp_path):
    path, _ = full_run
    header, *records = path.read_text().splitlines(keepends=True)
    partial = tmp_path / "g2.jsonl"
    partial.write_text(header + "".join(r for r in records if json.loads(r)["generation"] <= 2))
    state = resume_state(load_ledger(partial, space), PARAMS, default_instances())
    assert state.next_generation == 3 and not state.complete


def test_resume_parameter_mismatch(space, full_run):
    path, _ = full_run
    with pytest.raises(LedgerError, match="parameter mismatch"):
        resume_state(load_ledger(path, space), GAParams(seed=43), default_instances())
    with pytest.raises(LedgerError, match="parameter mismatch"):
        run_nsga2(space, SyntheticEvaluator(space), GAParams(seed=43), ledger=load_ledger(path, space), instances=default_instances())


def test_resume_after_kill_at_every_point(space, full_run, tmp_path):
    """Kill after k evaluations for every k; the resumed ledger equals the uninterrupted one byte for byte."""
    full_path, result = full_run
    reference = full_path.read_bytes()
    for k in range(result.evaluations):
        path = tmp_path / f"kill{k}.jsonl"
        with pytest.raises(Killed):
            run_nsga2(space, DiesAfter(space, k), PARAMS, ledger=new_ledger(path, space), instances=default_instances())
        ledger = load_ledger(path, space)
        assert len(ledger.records) == k
        resumed = run_nsga2(space, SyntheticEvaluator(space), PARAMS, ledger=ledger, instances=default_instances())
        assert resumed.new_evaluations == result.evaluations - k
        assert path.read_bytes() == reference
        assert [r.id for r in resumed.pareto.members] == [r.id for r in result.pareto.members]


def test_resume_after_torn_write(space, full_run, tmp_path):
    full_path, result = full_run
    data = full_path.read_bytes()
    path = tmp_path / "torn.jsonl"
    path.write_bytes(data[: len(data) - 25])
    ledger = load_ledger(path, space)
    assert ledger.ignored_partial_lines == 1
    resumed = run_nsga2(space, SyntheticEvaluator(space), PARAMS, ledger=ledger, instances=default_instances())
    assert resumed.new_evaluations == 1
    assert path.read_bytes() == data


def test_objectives_survive_float_round_trip(space, tmp_path):
    ledger = new_ledger(tmp_path / "l.jsonl", space)
    rec = synthetic_record(space, 5)
    rec.objectives = ObjectiveVector(1 / 3, 0.1 + 0.2, 984.8)
    ledger.append(rec)
    assert load_ledger(tmp_path / "l.jsonl").records[0].objectives == rec.objectives
