"""Per-objective hyperparameter importance over a set of evaluated configurations."""

from __future__ import annotations

import csv
import io
import logging
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ..evaluation import OK, EvaluationRecord
from ..search_space import CATEGORICAL, ConfigSpace
from .forest import ForestParams, feature_importance, fit_regression_forest

OBJECTIVE_NAMES = ("correctness", "perf_gain", "runtime")
COLUMN_TITLES = {
    "correctness": "Correctness Impact",
    "perf_gain": "Performance Impact",
    "runtime": "Runtime Impact",
}
METHOD = "mean decrease in impurity"

log = logging.getLogger(__name__)


@dataclass
class ImportanceReport:
    objective: str
    importances: dict[str, float]
    forest_params: dict
    sample_count: int
    method: str = METHOD
    constant_target: bool = False

    def ranking(self) -> list[str]:
        return sorted(self.importances, key=lambda k: -self.importances[k])

    def to_json(self) -> dict:
        return {
            "objective": self.objective,
            "importances": dict(self.importances),
            "forest_params": dict(self.forest_params),
            "sample_count": self.sample_count,
            "method": self.method,
            "constant_target": self.constant_target,
        }


def feature_matrix(records: Sequence[EvaluationRecord], space: ConfigSpace) -> np.ndarray:
    """Decoded values as floats; categoricals enter as their label if numeric, else 1-based position."""
    rows = []
    for rec in records:
        row = []
        for p in space.params:
            v = rec.configuration.values.get(p.name)
            if v is None:
                raise ValueError(f"record {rec.display_name()} has no value for {p.name}")
            if p.kind == CATEGORICAL and not isinstance(v, (int, float)):
                v = p.categories.index(v) + 1
            row.append(float(v))
        rows.append(row)
    return np.array(rows, dtype=float)


def usable_records(records: Sequence[EvaluationRecord]) -> list[EvaluationRecord]:
    """Successful, non-baseline records: the configurations the optimizer actually evaluated."""
    return [r for r in records if r.status == OK and not r.configuration.baseline]


def importance_report(
    records: Sequence[EvaluationRecord],
    objective: str,
    space: ConfigSpace,
    params: ForestParams = ForestParams(),
) -> ImportanceReport:
    if objective not in OBJECTIVE_NAMES:
        raise ValueError(f"unknown objective {objective!r}")
    if len(records) < 2:
        raise ValueError("too few records: need at least 2")
    X = feature_matrix(records, space)
    y = np.array([getattr(r.objectives, objective) for r in records], dtype=float)
    forest = fit_regression_forest(X, y, params, feature_names=space.names)
    constant = bool(np.all(y == y[0]))
    if constant:
        log.warning("objective %s is constant over %d records; importances are all zero", objective, len(y))
    return ImportanceReport(
        objective, feature_importance(forest), params.to_json(space.n_vars), len(records), constant_target=constant
    )


def importance_table(reports: Sequence[ImportanceReport], space: ConfigSpace) -> list[dict[str, str]]:
    """Rows per hyperparameter, one impact column per objective."""
    rows = []
    for name in space.names:
        row = {"Hyperparameter": name}
        for rep in reports:
            row[COLUMN_TITLES[rep.objective]] = f"{rep.importances[name]:.3f}"
        rows.append(row)
    return rows


def importance_csv(reports: Sequence[ImportanceReport], space: ConfigSpace) -> str:
    rows = importance_table(reports, space)
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=list(rows[0].keys()), lineterminator="\n")
    writer.writeheader()
    writer.writerows(rows)
    return buf.getvalue()
