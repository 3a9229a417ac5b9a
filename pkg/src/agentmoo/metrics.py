"""Pareto dominance, front extraction, normalization and 3-D hypervolume.

Normalized points are in all-maximize form: correctness and gain as they are,
runtime negated, then min-max scaled to [0, 1].  The hypervolume reference
point sits just below the unit cube at (-0.1, -0.1, -0.1).
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Sequence

from .evaluation import EvaluationRecord, ObjectiveVector

DEFAULT_REFERENCE = (-0.1, -0.1, -0.1)
OBJECTIVES = ("correctness", "perf_gain", "runtime")


def dominates(a: ObjectiveVector, b: ObjectiveVector) -> bool:
    return dominates_min(a.minimization(), b.minimization())


def dominates_min(a: Sequence[float], b: Sequence[float]) -> bool:
    """Minimization dominance between plain vectors."""
    strictly = False
    for x, y in zip(a, b):
        if x > y:
            return False
        if x < y:
            strictly = True
    return strictly


@dataclass
class ParetoFront:
    members: list[EvaluationRecord]
    duplicates: list[EvaluationRecord] = field(default_factory=list)
    extracted_from: int = 0

    def labels(self) -> list[str]:
        return [r.display_name() for r in self.members]

    def __len__(self) -> int:
        return len(self.members)


def pareto_front(records: Sequence[EvaluationRecord]) -> ParetoFront:
    """Non-dominated records; exact objective ties keep the first and list the rest as duplicates."""
    if not records:
        raise ValueError("cannot extract a front from zero records")
    vecs = [r.objectives.minimization() for r in records]
    members: list[EvaluationRecord] = []
    duplicates: list[EvaluationRecord] = []
    seen: dict[tuple, int] = {}
    for i, rec in enumerate(records):
        if any(dominates_min(vecs[j], vecs[i]) for j in range(len(records)) if j != i):
            continue
        key = tuple(vecs[i])
        if key in seen:
            duplicates.append(rec)
        else:
            seen[key] = i
            members.append(rec)
    return ParetoFront(members, duplicates, len(records))


def objective_bounds(vectors: Sequence[ObjectiveVector]) -> list[tuple[float, float]]:
    """Per-objective (min, max) in natural units."""
    if not vectors:
        raise ValueError("need at least one vector to induce bounds")
    cols = list(zip(*(v.to_json().values() for v in vectors)))
    return [(min(c), max(c)) for c in cols]


def normalize(
    vectors: Sequence[ObjectiveVector], bounds: Sequence[tuple[float, float]] | None = None
) -> tuple[list[tuple[float, float, float]], list[tuple[float, float]]]:
    """Scale to the unit cube in all-maximize form; returns (points, bounds used).

    A zero-range objective maps to 1.0 for every point.
    """
    if bounds is None:
        bounds = objective_bounds(vectors)
    bounds = [tuple(map(float, b)) for b in bounds]
    (c_lo, c_hi), (g_lo, g_hi), (r_lo, r_hi) = bounds

    def scale(x: float, lo: float, hi: float) -> float:
        return 1.0 if hi == lo else (x - lo) / (hi - lo)

    points = [
        (
            scale(v.correctness, c_lo, c_hi),
            scale(v.perf_gain, g_lo, g_hi),
            # runtime inverted: fastest -> 1
            scale(-v.runtime, -r_hi, -r_lo),
        )
        for v in vectors
    ]
    return points, bounds


@dataclass
class HypervolumeReport:
    raw_volume: float
    percent: float
    reference_point: tuple[float, ...]
    normalization_bounds: list[tuple[float, float]] | None
    front_size: int
    convention: str = "percent = 100 * volume / prod(1 - reference)"

    def to_json(self) -> dict:
        return {
            "raw_volume": self.raw_volume,
            "percent": self.percent,
            "reference_point": list(self.reference_point),
            "normalization_bounds": None
            if self.normalization_bounds is None
            else {name: list(b) for name, b in zip(OBJECTIVES, self.normalization_bounds)},
            "front_size": self.front_size,
            "convention": self.convention,
        }


def _area_2d(points: Sequence[tuple[float, float]], ref: tuple[float, float]) -> float:
    # union of [ref, p] rectangles, maximization
    area = 0.0
    best_y = ref[1]
    for x, y in sorted(points, key=lambda p: (-p[0], -p[1])):
        if y > best_y:
            area += (x - ref[0]) * (y - best_y)
            best_y = y
    return area


def hypervolume_volume(points: Sequence[Sequence[float]], reference: Sequence[float] = DEFAULT_REFERENCE) -> float:
    """Exact volume dominated by maximization ``points`` above ``reference``.

    Sweeps the third coordinate from high to low; between consecutive levels
    the dominated region is a prism over the 2-D union of the points seen so far.
    """
    ref = tuple(float(r) for r in reference)
    if len(ref) != 3:
        raise ValueError("reference point must be 3-dimensional")
    pts = []
    for p in points:
        if len(p) != 3:
            raise ValueError("points must be 3-dimensional")
        if not all(pi > ri for pi, ri in zip(p, ref)):
            raise ValueError(f"point {tuple(p)} does not dominate reference {ref}")
        pts.append(tuple(float(v) for v in p))
    # weakly dominated points add no volume but would split slabs and perturb rounding
    pts = [
        p
        for i, p in enumerate(pts)
        if not any(q != p and all(a >= b for a, b in zip(q, p)) for q in pts) and p not in pts[:i]
    ]
    pts.sort(key=lambda p: -p[2])
    volume = 0.0
    slice_points: list[tuple[float, float]] = []
    for i, p in enumerate(pts):
        slice_points.append((p[0], p[1]))
        next_z = pts[i + 1][2] if i + 1 < len(pts) else ref[2]
        if next_z < p[2]:
            volume += _area_2d(slice_points, ref[:2]) * (p[2] - next_z)
    return volume


def hypervolume3(
    points: Sequence[Sequence[float]],
    reference: Sequence[float] = DEFAULT_REFERENCE,
    bounds: Sequence[tuple[float, float]] | None = None,
) -> HypervolumeReport:
    raw = hypervolume_volume(points, reference)
    full = math.prod(1.0 - r for r in reference)
    return HypervolumeReport(raw, 100.0 * raw / full, tuple(reference), bounds, len(points))


def records_hypervolume(
    records: Sequence[EvaluationRecord],
    bounds: Sequence[tuple[float, float]] | None = None,
    reference: Sequence[float] = DEFAULT_REFERENCE,
) -> HypervolumeReport:
    """Normalize the records' objectives (induced bounds unless given) and measure their hypervolume."""
    if not records:
        raise ValueError("empty selection")
    points, used = normalize([r.objectives for r in records], bounds)
    return hypervolume3(points, reference, used)


def per_record_hypervolume(
    records: Sequence[EvaluationRecord],
    bounds: Sequence[tuple[float, float]] | None = None,
    reference: Sequence[float] = DEFAULT_REFERENCE,
) -> list[float]:
    """Single-point hypervolume percent of each record under shared bounds (the per-row HV column)."""
    points, used = normalize([r.objectives for r in records], bounds)
    return [hypervolume3([p], reference, used).percent for p in points]


TABLE_COLUMNS = ("Config", "Temp", "TopP", "Token", "Step", "Cost", "ETi", "LTi", "Pr", "Corr", "Perf (%)", "RT (s)", "HV (%)")
_PARAM_COLUMNS = (
    ("Temp", "temperature"),
    ("TopP", "top_p"),
    ("Token", "max_tokens"),
    ("Step", "step_limit"),
    ("Cost", "cost_limit"),
    ("ETi", "env_timeout"),
    ("LTi", "llm_timeout"),
    ("Pr", "prompt_template"),
)


def _fmt(value) -> str:
    if value is None:
        return "-"
    if isinstance(value, float):
        return f"{value:.3f}".rstrip("0").rstrip(".") if value != int(value) else f"{value:.1f}"
    return str(value)


def table_rows(
    records: Sequence[EvaluationRecord], hv_percent: Sequence[float] | None = None, n_instances: int | None = None
) -> list[dict[str, str]]:
    rows = []
    for i, rec in enumerate(records):
        n = n_instances or rec.n_instances
        row = {"Config": rec.display_name()}
        for column, name in _PARAM_COLUMNS:
            row[column] = _fmt(rec.configuration.values.get(name))
        row["Corr"] = rec.objectives.correctness_label(n)
        row["Perf (%)"] = f"{rec.objectives.perf_gain:.2f}"
        row["RT (s)"] = f"{rec.objectives.runtime:.1f}"
        row["HV (%)"] = "" if hv_percent is None else f"{hv_percent[i]:.2f}"
        rows.append(row)
    return rows


def front_csv(records: Sequence[EvaluationRecord], hv_percent: Sequence[float] | None = None) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=TABLE_COLUMNS, lineterminator="\n")
    writer.writeheader()
    writer.writerows(table_rows(records, hv_percent))
    return buf.getvalue()


def format_table(rows: Sequence[dict[str, str]], columns: Sequence[str] | None = None) -> str:
    if not rows:
        return ""
    columns = list(columns or rows[0].keys())
    widths = {c: max(len(c), *(len(str(r.get(c, ""))) for r in rows)) for c in columns}
    lines = ["  ".join(c.ljust(widths[c]) for c in columns)]
    lines.append("  ".join("-" * widths[c] for c in columns))
    for r in rows:
        lines.append("  ".join(str(r.get(c, "")).ljust(widths[c]) for c in columns))
    return "\n".join(lines)
