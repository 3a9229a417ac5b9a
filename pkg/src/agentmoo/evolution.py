"""NSGA-II over the unit-interval genome.

Every generation draws from its own random stream, derived from the master
seed and the generation index.  Together with the evaluation cache this makes
a run replayable: resuming from a ledger re-derives each generation's
offspring and only evaluates configurations the ledger does not hold yet.
"""

from __future__ import annotations

import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable, Mapping, Sequence

import numpy as np

from .evaluation import FAILED, OK, EvaluationRecord, Evaluator, ObjectiveVector, default_instances
from .metrics import ParetoFront, dominates_min, objective_bounds, pareto_front, records_hypervolume
from .persistence import RunLedger, check_params
from .search_space import ConfigSpace, Configuration, decode, random_genome

log = logging.getLogger(__name__)

INF = math.inf


@dataclass(frozen=True)
class GAParams:
    population_size: int = 5
    generations: int = 5
    crossover_probability: float = 0.9
    crossover_eta: float = 15.0
    mutation_probability: float | None = None  # None -> 1 / n_vars
    mutation_eta: float = 20.0
    seed: int = 42
    penalty_runtime: float = 3600.0

    def __post_init__(self) -> None:
        if self.population_size < 2:
            raise ValueError("population_size must be at least 2")
        if self.generations < 1:
            raise ValueError("generations must be positive")
        for name in ("crossover_probability", "mutation_probability"):
            value = getattr(self, name)
            if value is not None and not 0.0 <= value <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1]")
        if self.crossover_eta <= 0 or self.mutation_eta <= 0:
            raise ValueError("distribution indices must be positive")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be an unsigned 64-bit integer")
        if self.penalty_runtime <= 0:
            raise ValueError("penalty_runtime must be positive")

    def mutation_rate(self, n_vars: int) -> float:
        return 1.0 / n_vars if self.mutation_probability is None else self.mutation_probability

    def to_json(self, n_vars: int | None = None) -> dict:
        rate = self.mutation_probability
        if rate is None and n_vars is not None:
            rate = 1.0 / n_vars
        return {
            "population_size": self.population_size,
            "generations": self.generations,
            "crossover_probability": self.crossover_probability,
            "crossover_eta": self.crossover_eta,
            "mutation_probability": rate,
            "mutation_eta": self.mutation_eta,
            "seed": self.seed,
            "penalty_runtime": self.penalty_runtime,
        }

    @classmethod
    def from_json(cls, data: Mapping) -> "GAParams":
        known = {f: data[f] for f in cls.__dataclass_fields__ if f in data}
        return cls(**known)


@dataclass
class Individual:
    genome: np.ndarray
    configuration: Configuration
    objectives: ObjectiveVector | None = None
    rank: int = 0
    crowding: float = 0.0

    def minimization(self) -> tuple[float, float, float]:
        return self.objectives.minimization()


@dataclass
class OptimizationResult:
    all_records: list[EvaluationRecord]
    final_population: list[Individual]
    pareto: ParetoFront
    per_generation_hypervolume: list[float]
    hv_bounds: list[tuple[float, float]]
    new_evaluations: int = 0

    @property
    def evaluations(self) -> int:
        return len(self.all_records)


# -- sorting -------------------------------------------------------------------


def fast_non_dominated_sort(objectives: Sequence[Sequence[float]]) -> list[list[int]]:
    """Split minimization vectors into successive non-dominated fronts (lists of indices)."""
    n = len(objectives)
    if n == 0:
        return []
    dim = len(objectives[0])
    if any(len(v) != dim for v in objectives):
        raise ValueError("objective vectors differ in dimension")
    dominated_by = [[] for _ in range(n)]
    counts = [0] * n
    for i in range(n):
        for j in range(i + 1, n):
            if dominates_min(objectives[i], objectives[j]):
                dominated_by[i].append(j)
                counts[j] += 1
            elif dominates_min(objectives[j], objectives[i]):
                dominated_by[j].append(i)
                counts[i] += 1
    fronts = [[i for i in range(n) if counts[i] == 0]]
    while True:
        nxt = set()
        for i in fronts[-1]:
            for j in dominated_by[i]:
                counts[j] -= 1
                if counts[j] == 0:
                    nxt.add(j)
        if not nxt:
            return fronts
        fronts.append(sorted(nxt))


def crowding_distance(front_objectives: Sequence[Sequence[float]]) -> list[float]:
    n = len(front_objectives)
    if n <= 2:
        return [INF] * n
    distance = [0.0] * n
    for m in range(len(front_objectives[0])):
        order = sorted(range(n), key=lambda i: front_objectives[i][m])
        lo, hi = front_objectives[order[0]][m], front_objectives[order[-1]][m]
        if hi == lo:
            continue
        distance[order[0]] = distance[order[-1]] = INF
        for k in range(1, n - 1):
            i = order[k]
            if distance[i] != INF:
                gap = front_objectives[order[k + 1]][m] - front_objectives[order[k - 1]][m]
                distance[i] += gap / (hi - lo)
    return distance


def assign_rank_and_crowding(individuals: Sequence[Individual]) -> list[list[int]]:
    fronts = fast_non_dominated_sort([ind.minimization() for ind in individuals])
    for rank, front in enumerate(fronts):
        dist = crowding_distance([individuals[i].minimization() for i in front])
        for i, d in zip(front, dist):
            individuals[i].rank = rank
            individuals[i].crowding = d
    return fronts


def survivor_selection(combined: Sequence[Individual], k: int) -> list[Individual]:
    """Elitist truncation: whole fronts in rank order, then the last front by descending crowding."""
    if k > len(combined):
        raise ValueError(f"cannot select {k} survivors from {len(combined)} individuals")
    pool = [replace(ind) for ind in combined]
    chosen: list[Individual] = []
    for front in assign_rank_and_crowding(pool):
        if len(chosen) + len(front) <= k:
            chosen.extend(pool[i] for i in front)
        else:
            # stable sort keeps input order among equal crowding
            by_crowding = sorted(front, key=lambda i: -pool[i].crowding)
            chosen.extend(pool[i] for i in by_crowding[: k - len(chosen)])
        if len(chosen) == k:
            break
    return chosen


# -- variation -----------------------------------------------------------------


def _crowded_better(a: Individual, b: Individual) -> int:
    if a.rank != b.rank:
        return -1 if a.rank < b.rank else 1
    if a.crowding != b.crowding:
        return -1 if a.crowding > b.crowding else 1
    return 0


def tournament_select(population: Sequence[Individual], rng: np.random.Generator) -> int:
    """Binary tournament under the crowded-comparison order; returns the winner's index."""
    if len(population) < 2:
        raise ValueError("tournament needs at least two individuals")
    i, j = (int(x) for x in rng.choice(len(population), size=2, replace=False))
    verdict = _crowded_better(population[i], population[j])
    if verdict == 0:
        return i if rng.random() < 0.5 else j
    return i if verdict < 0 else j


def sbx_spread(u: np.ndarray | float, eta: float):
    u = np.asarray(u, dtype=float)
    with np.errstate(divide="ignore"):
        low = (2.0 * u) ** (1.0 / (eta + 1.0))
        high = (1.0 / (2.0 * (1.0 - u))) ** (1.0 / (eta + 1.0))
    return np.where(u < 0.5, low, high)


def sbx_crossover(p1, p2, params: GAParams, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    p1 = np.asarray(p1, dtype=float)
    p2 = np.asarray(p2, dtype=float)
    if p1.shape != p2.shape:
        raise ValueError("parents differ in length")
    if rng.random() >= params.crossover_probability:
        return p1.copy(), p2.copy()
    beta = sbx_spread(rng.random(p1.shape[0]), params.crossover_eta)
    c1 = 0.5 * ((1 + beta) * p1 + (1 - beta) * p2)
    c2 = 0.5 * ((1 - beta) * p1 + (1 + beta) * p2)
    return np.clip(c1, 0.0, 1.0), np.clip(c2, 0.0, 1.0)


def polynomial_mutation(genome, n: int, params: GAParams, rng: np.random.Generator) -> np.ndarray:
    """Bounded polynomial mutation on [0, 1] applied gene-wise with the configured probability."""
    g = np.asarray(genome, dtype=float).copy()
    mask = rng.random(g.shape[0]) < params.mutation_rate(n)
    u = rng.random(g.shape[0])
    eta = params.mutation_eta
    power = 1.0 / (eta + 1.0)
    for i in np.flatnonzero(mask):
        x = g[i]
        if u[i] < 0.5:
            val = 2.0 * u[i] + (1.0 - 2.0 * u[i]) * (1.0 - x) ** (eta + 1.0)
            delta = val**power - 1.0
        else:
            val = 2.0 * (1.0 - u[i]) + 2.0 * (u[i] - 0.5) * x ** (eta + 1.0)
            delta = 1.0 - val**power
        g[i] = min(max(x + delta, 0.0), 1.0)
    return g


def make_offspring(population: Sequence[Individual], params: GAParams, rng: np.random.Generator) -> list[np.ndarray]:
    """Produce ``population_size`` children; the spare child of an odd count is discarded."""
    n = len(population[0].genome)
    children: list[np.ndarray] = []
    while len(children) < params.population_size:
        a = tournament_select(population, rng)
        b = tournament_select(population, rng)
        c1, c2 = sbx_crossover(population[a].genome, population[b].genome, params, rng)
        children.append(polynomial_mutation(c1, n, params, rng))
        children.append(polynomial_mutation(c2, n, params, rng))
    return children[: params.population_size]


def generation_rng(seed: int, generation: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(generation,)))


# -- generational loop -------------------------------------------------------

Resolver = Callable[[list[Configuration], int], list[EvaluationRecord]]


def _individuals(genomes, configs, records) -> list[Individual]:
    return [Individual(g, c, r.objectives) for g, c, r in zip(genomes, configs, records)]


def _drive(space: ConfigSpace, params: GAParams, resolve: Resolver) -> list[Individual]:
    rng = generation_rng(params.seed, 0)
    genomes = [random_genome(space, rng) for _ in range(params.population_size)]
    configs = [decode(g, space) for g in genomes]
    population = _individuals(genomes, configs, resolve(configs, 0))
    population = survivor_selection(population, params.population_size)
    for generation in range(1, params.generations + 1):
        rng = generation_rng(params.seed, generation)
        genomes = make_offspring(population, params, rng)
        configs = [decode(g, space) for g in genomes]
        offspring = _individuals(genomes, configs, resolve(configs, generation))
        population = survivor_selection(population + offspring, params.population_size)
    return population


class _Missing(Exception):
    def __init__(self, generation: int):
        self.generation = generation


def replay_progress(space: ConfigSpace, params: GAParams, cache: Mapping[str, EvaluationRecord]) -> int:
    """First generation whose configurations are not all cached (``generations + 1`` if complete)."""

    def resolve(configs, generation):
        if any(c.id not in cache for c in configs):
            raise _Missing(generation)
        return [cache[c.id] for c in configs]

    try:
        _drive(space, params, resolve)
    except _Missing as missing:
        return missing.generation
    return params.generations + 1


def failed_record(config: Configuration, params: GAParams, generation: int, evaluator: str, reason: str) -> EvaluationRecord:
    return EvaluationRecord(
        configuration=config,
        objectives=ObjectiveVector(0.0, 0.0, params.penalty_runtime),
        per_instance=[],
        generation=generation,
        wall_time=0.0,
        status=FAILED,
        evaluator=evaluator,
        error=reason,
    )


def evaluate_configuration(
    evaluator: Evaluator,
    config: Configuration,
    instances: Sequence[str],
    generation: int,
    params: GAParams,
) -> EvaluationRecord:
    """Evaluate one configuration; evaluator exceptions become a failed record with penalty objectives."""
    start = time.perf_counter()
    try:
        objectives, results = evaluator.score(config, instances)
    except Exception as exc:  # noqa: BLE001 - any evaluator failure is data
        log.warning("evaluation of %s failed: %s", config.id, exc)
        return failed_record(config, params, generation, evaluator.label, str(exc))
    wall = 0.0 if evaluator.deterministic else time.perf_counter() - start
    return EvaluationRecord(config, objectives, list(results), generation, wall, OK, evaluator.label)


def cumulative_hypervolume(
    records: Sequence[EvaluationRecord], generations: int, bounds: Sequence[tuple[float, float]] | None = None
) -> tuple[list[float], list[tuple[float, float]]]:
    """Hypervolume percent of all records evaluated up to each generation, under one fixed set of bounds."""
    if bounds is None:
        bounds = objective_bounds([r.objectives for r in records])
    out = []
    for g in range(generations + 1):
        upto = [r for r in records if r.generation <= g]
        out.append(records_hypervolume(upto, bounds).percent if upto else 0.0)
    return out, list(bounds)


def run_nsga2(
    space: ConfigSpace,
    evaluator: Evaluator,
    params: GAParams = GAParams(),
    ledger: RunLedger | None = None,
    instances: Sequence[str] | None = None,
    parallel: int = 1,
    hv_bounds: Sequence[tuple[float, float]] | None = None,
    on_generation: Callable[[int, list[EvaluationRecord]], None] | None = None,
) -> OptimizationResult:
    """Run (or resume) NSGA-II.

    Records already in ``ledger`` are reused instead of re-evaluated, so
    passing a ledger from an interrupted run continues it deterministically.
    The returned front is taken over every evaluated record, not just the
    final population.
    """
    instances = list(instances) if instances is not None else default_instances()
    archive: list[EvaluationRecord] = []
    cache: dict[str, EvaluationRecord] = {}
    if ledger is not None:
        if ledger.header.get("ga_params") is not None:
            check_params(ledger, params.to_json(space.n_vars), instances)
        ledger.drop_partial_tail()
        for rec in ledger.records:
            cache[rec.id] = rec
            archive.append(rec)
    workers = parallel if evaluator.concurrent_safe and parallel > 1 else 1
    new_evaluations = 0

    def commit(record: EvaluationRecord) -> None:
        nonlocal new_evaluations
        if ledger is not None:
            ledger.append(record)
        cache[record.id] = record
        archive.append(record)
        new_evaluations += 1

    def resolve(configs: list[Configuration], generation: int) -> list[EvaluationRecord]:
        todo: list[Configuration] = []
        for c in configs:
            if c.id not in cache and all(c.id != t.id for t in todo):
                todo.append(c)
        if workers == 1:
            for c in todo:
                commit(evaluate_configuration(evaluator, c, instances, generation, params))
        else:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                futures = [
                    pool.submit(evaluate_configuration, evaluator, c, instances, generation, params) for c in todo
                ]
                # merge in offspring order, not completion order
                for fut in futures:
                    commit(fut.result())
        if on_generation is not None:
            on_generation(generation, archive)
        return [cache[c.id] for c in configs]

    population = _drive(space, params, resolve)
    hv, bounds = cumulative_hypervolume(archive, params.generations, hv_bounds)
    return OptimizationResult(
        all_records=archive,
        final_population=population,
        pareto=pareto_front(archive),
        per_generation_hypervolume=hv,
        hv_bounds=bounds,
        new_evaluations=new_evaluations,
    )
