"""Acceptance criteria 1-9, each run at its stated tolerance and reported as one PASS/FAIL line."""

import time

import numpy as np
import pytest
from conftest import record_acceptance
from oracles import front_ranks_by_peeling, hv_grid, hv_inclusion_exclusion, mw_exact_p_vectorized, random_search_best_quality

from agentmoo.analysis import ForestParams, feature_importance, fit_regression_forest, mann_whitney_u, significant_gain
from agentmoo.analysis.importance import importance_report, usable_records
from agentmoo.evaluation import InstanceResult, SyntheticEvaluator, aggregate, default_instances, load_table2, synthetic_quality
from agentmoo.evolution import GAParams, fast_non_dominated_sort, polynomial_mutation, run_nsga2, sbx_crossover
from agentmoo.metrics import dominates, hypervolume3, hypervolume_volume, pareto_front
from agentmoo.persistence import RunLedger, load_ledger, make_header
from agentmoo.search_space import default_space

REF = (-0.1, -0.1, -0.1)
RUNTIME_INPUTS = {"step_limit", "env_timeout", "llm_timeout", "max_tokens"}


def test_criterion_1_table2_dominance():
    start = time.perf_counter()
    records = load_table2().records()
    front = pareto_front(records)
    members = set(front.labels())
    default = next(r for r in records if r.label == "default")
    dominating = {r.label for r in front.members if dominates(r.objectives, default.objectives)}
    elapsed = time.perf_counter() - start
    ok = members == {"#4", "#5", "#9", "#15", "#16"} and dominating == {"#4", "#5", "#9", "#15"} and elapsed < 1
    record_acceptance(1, "Table 2 dominance", ok, f"front={sorted(members)}, dominate default={sorted(dominating)}, {elapsed:.3f}s")
    assert ok


def test_criterion_2_hypervolume():
    start = time.perf_counter()
    single = hypervolume3([(1, 1, 1)], REF)
    analytic = single.raw_volume == pytest.approx(1.331, abs=1e-12) and single.percent == pytest.approx(100.0, abs=1e-12)
    rng = np.random.default_rng(2024)
    worst_ie = 0.0
    for _ in range(200):
        pts = rng.random((int(rng.integers(1, 7)), 3))
        worst_ie = max(worst_ie, abs(hypervolume_volume(pts, REF) - hv_inclusion_exclusion(pts, REF)))
    worst_grid = 0.0
    for _ in range(5):
        pts = rng.random((25, 3))
        worst_grid = max(worst_grid, abs(hypervolume_volume(pts, REF) - hv_grid(pts, REF)))
    elapsed = time.perf_counter() - start
    ok = analytic and worst_ie <= 1e-9 and worst_grid <= 1e-2 and elapsed < 10
    record_acceptance(
        2,
        "hypervolume",
        ok,
        f"single box {single.raw_volume:.12g} / {single.percent:.10g}%, max |ie| err {worst_ie:.1e}, "
        f"max |grid| err {worst_grid:.1e}, {elapsed:.1f}s",
    )
    assert ok


def test_criterion_3_nsga2_on_synthetic_model():
    start = time.perf_counter()
    space = default_space()
    random_best = random_search_best_quality(n_samples=25, trials=20000, seed=0)
    monotone = better = 0
    bests = []
    for seed in range(20):
        res = run_nsga2(space, SyntheticEvaluator(space), GAParams(seed=seed))
        hv = res.per_generation_hypervolume
        monotone += hv[-1] >= hv[0]
        best = max(synthetic_quality(r.configuration) for r in res.all_records)
        bests.append(best)
        better += best > random_best
    elapsed = time.perf_counter() - start
    ok = monotone == 20 and better >= 15 and elapsed < 30
    record_acceptance(
        3,
        "NSGA-II sanity",
        ok,
        f"archive HV monotone {monotone}/20; best q > random-25 mean best ({random_best:.4f}) in {better}/20 seeds "
        f"(median best q {np.median(bests):.4f}); {elapsed:.1f}s",
    )
    assert monotone == 20, "archive hypervolume decreased"
    assert better >= 15, f"best quality beat random search in only {better}/20 seeds"


def test_criterion_4_sort_oracle():
    rng = np.random.default_rng(4)
    mismatches = 0
    for _ in range(200):
        n = int(rng.integers(1, 51))
        pts = [tuple(map(float, p)) for p in rng.integers(0, 5, size=(n, 3))]
        fronts = fast_non_dominated_sort(pts)
        ranks = [None] * n
        for k, f in enumerate(fronts):
            for i in f:
                ranks[i] = k
        mismatches += ranks != front_ranks_by_peeling(pts)
    ok = mismatches == 0
    record_acceptance(4, "non-dominated sort oracle", ok, f"{200 - mismatches}/200 instances identical")
    assert ok


def test_criterion_5_mann_whitney():
    rng = np.random.default_rng(5)
    checked = mismatches = 0
    for n1 in range(1, 10):
        for n2 in range(1, 11 - n1):
            for _ in range(100):
                a = rng.integers(0, 6, size=n1).tolist()
                b = rng.integers(0, 6, size=n2).tolist()
                res = mann_whitney_u(a, b)
                u, p = mw_exact_p_vectorized(a, b)
                checked += 1
                mismatches += res.method != "exact" or abs(res.p_value - p) > 1e-12 or res.u_statistic != u
    worked = mann_whitney_u([1, 2, 3], [4, 5, 6])
    worked_ok = worked.u_statistic == 0 and worked.p_value == pytest.approx(0.1, abs=1e-15)
    base = [10.0] * 20
    jitter = [0.001 * k * (1 if k % 2 else -1) for k in range(1, 21)]
    faster = significant_gain(base, [9.0 + j for j in jitter])
    slower = significant_gain(base, [11.0 + j for j in jitter])
    gate_ok = faster == pytest.approx(10.0, abs=0.01) and slower == 0.0
    ok = mismatches == 0 and worked_ok and gate_ok
    record_acceptance(
        5,
        "Mann-Whitney exactness",
        ok,
        f"{checked - mismatches}/{checked} exact p-values match enumeration; worked case U={worked.u_statistic:g} "
        f"p={worked.p_value:g}; gate faster={faster:.3f}% slower={slower:g}%",
    )
    assert ok


def _row_fixture(n_instances, passed, perf, runtime):
    # passing instances share the gain so that the mean over all instances equals perf
    gain = perf * n_instances / passed if passed else 0.0
    base = [10.0] * 20
    patched = [10.0 * (1 - gain / 100) + 0.001 * (-1) ** k for k in range(1, 21)] if gain else base
    return [InstanceResult(f"train-{i}", i <= passed, runtime, base, patched) for i in range(1, n_instances + 1)]


def test_criterion_6_table2_aggregation():
    trace = load_table2()
    problems = []
    for row in trace.rows:
        stored = row.score()
        flags = [r.passed for r in row.results]
        if sum(flags) / len(flags) != stored.correctness:
            problems.append(f"{row.label}: pass flags give {sum(flags)}/{len(flags)}")
        rebuilt = aggregate(_row_fixture(len(flags), sum(flags), stored.perf_gain, stored.runtime))
        shown = lambda v: (v.correctness_label(9), f"{v.perf_gain:.2f}", f"{v.runtime:.1f}")  # noqa: E731
        if rebuilt.correctness != stored.correctness or shown(rebuilt) != shown(stored):
            problems.append(f"{row.label}: {shown(rebuilt)} vs {shown(stored)}")
        if abs(rebuilt.perf_gain - stored.perf_gain) > 1e-9 or abs(rebuilt.runtime - stored.runtime) > 1e-9:
            problems.append(f"{row.label}: drift beyond 1e-9")
    ok = not problems
    record_acceptance(6, "Table 2 aggregation", ok, f"{len(trace.rows) - len(problems)}/{len(trace.rows)} rows reproduced" + (f"; {problems}" if problems else ""))
    assert ok


def test_criterion_7_forest_importance():
    rng = np.random.default_rng(7)
    X = rng.random((50, 8))
    y = X[:, 0] + rng.normal(0, 0.01, 50)
    imp = feature_importance(fit_regression_forest(X, y, ForestParams(), feature_names=[f"x{i + 1}" for i in range(8)]))
    signal_ok = imp["x1"] > 0.6 and abs(sum(imp.values()) - 1.0) <= 1e-9

    # the canonical 25-record ledger: synthetic evaluator, pop 5, gens 5, seed 42
    space = default_space()
    res = run_nsga2(space, SyntheticEvaluator(space), GAParams(seed=42))
    records = usable_records(res.all_records)
    report = importance_report(records, "runtime", space)
    top3 = report.ranking()[:3]
    runtime_ok = len(records) == 25 and set(top3) <= RUNTIME_INPUTS and abs(sum(report.importances.values()) - 1) <= 1e-9
    ok = signal_ok and runtime_ok
    record_acceptance(
        7,
        "forest importance",
        ok,
        f"y=x1: importance {imp['x1']:.3f}; runtime top-3 on {len(records)}-record ledger = {top3} "
        f"({', '.join(f'{k}={report.importances[k]:.3f}' for k in top3)})",
    )
    assert signal_ok, "identity-signal check failed"
    assert runtime_ok, f"runtime top-3 {top3} not within {sorted(RUNTIME_INPUTS)}"


class _Killed(BaseException):
    pass


def test_criterion_8_determinism_and_resume(tmp_path):
    space = default_space()
    params = GAParams(seed=42)
    instances = default_instances()

    def fresh(path):
        header = make_header(space, params.to_json(space.n_vars), "synthetic", instances, created_at="fixed")
        return RunLedger.create(path, header)

    run_nsga2(space, SyntheticEvaluator(space), params, ledger=fresh(tmp_path / "a.jsonl"), instances=instances)
    run_nsga2(space, SyntheticEvaluator(space), params, ledger=fresh(tmp_path / "b.jsonl"), instances=instances)
    reference = (tmp_path / "a.jsonl").read_bytes()
    identical = reference == (tmp_path / "b.jsonl").read_bytes()

    resumed_ok = 0
    for stop in range(params.generations + 1):

        def kill_after(generation, archive, stop=stop):
            if generation == stop:
                raise _Killed()

        path = tmp_path / f"kill{stop}.jsonl"
        with pytest.raises(_Killed):
            run_nsga2(space, SyntheticEvaluator(space), params, ledger=fresh(path), instances=instances, on_generation=kill_after)
        run_nsga2(space, SyntheticEvaluator(space), params, ledger=load_ledger(path, space), instances=instances)
        resumed_ok += path.read_bytes() == reference
    points = params.generations + 1
    ok = identical and resumed_ok == points
    record_acceptance(8, "determinism and resume", ok, f"byte-identical reruns: {identical}; resumed ledgers identical {resumed_ok}/{points} interruption points")
    assert ok


def test_criterion_9_variation_properties():
    rng = np.random.default_rng(9)
    params = GAParams(crossover_probability=1.0)
    identity = GAParams(mutation_probability=0.0)
    in_bounds = sum_ok = mutation_identity = True
    for _ in range(100_000):
        p1, p2 = rng.random(8), rng.random(8)
        c1, c2 = sbx_crossover(p1, p2, params, rng)
        in_bounds &= bool(np.all((c1 >= 0) & (c1 <= 1) & (c2 >= 0) & (c2 <= 1)))
        free = (c1 > 0) & (c1 < 1) & (c2 > 0) & (c2 < 1)
        sum_ok &= bool(np.all(np.abs((c1 + c2 - p1 - p2)[free]) <= 1e-12))
        m = polynomial_mutation(c1, 8, GAParams(), rng)
        in_bounds &= bool(np.all((m >= 0) & (m <= 1)))
        mutation_identity &= bool(np.array_equal(polynomial_mutation(p1, 8, identity, rng), p1))
    ok = in_bounds and sum_ok and mutation_identity
    record_acceptance(9, "SBX and mutation", ok, f"10^5 trials: bounds {in_bounds}, child-sum {sum_ok}, p=0 identity {mutation_identity}")
    assert ok
