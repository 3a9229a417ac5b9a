"""Mann-Whitney U rank test and the significance gate on runtime measurements."""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations
from typing import Sequence

import numpy as np

EXACT_MAX_TOTAL = 16
EXACT_MAX_ARRANGEMENTS = 10**6
_TOL = 1e-9


@dataclass(frozen=True)
class UTestResult:
    u_statistic: float
    p_value: float
    method: str
    n1: int
    n2: int

    def to_json(self) -> dict:
        return {
            "u_statistic": self.u_statistic,
            "p_value": self.p_value,
            "method": self.method,
            "n1": self.n1,
            "n2": self.n2,
        }


def midranks(values: Sequence[float]) -> np.ndarray:
    """1-based ranks, ties sharing the mean of the ranks they span."""
    x = np.asarray(values, dtype=float)
    order = np.argsort(x, kind="mergesort")
    ranks = np.empty(len(x))
    i = 0
    while i < len(x):
        j = i
        while j + 1 < len(x) and x[order[j + 1]] == x[order[i]]:
            j += 1
        ranks[order[i : j + 1]] = (i + j) / 2 + 1
        i = j + 1
    return ranks


def _tie_term(ranks: np.ndarray) -> float:
    _, counts = np.unique(ranks, return_counts=True)
    return float(np.sum(counts.astype(float) ** 3 - counts))


def use_exact(n1: int, n2: int) -> bool:
    return n1 + n2 <= EXACT_MAX_TOTAL and math.comb(n1 + n2, n1) <= EXACT_MAX_ARRANGEMENTS


def _exact_p(ranks: np.ndarray, n1: int, u1: float) -> float:
    # permutation distribution of U1 conditional on the observed ties
    n = len(ranks)
    center = n1 * (n - n1) / 2
    offset = n1 * (n1 + 1) / 2
    observed = abs(u1 - center)
    hits = total = 0
    for subset in combinations(range(n), n1):
        u = sum(ranks[i] for i in subset) - offset
        total += 1
        if abs(u - center) >= observed - _TOL:
            hits += 1
    return hits / total


def _normal_p(ranks: np.ndarray, n1: int, n2: int, u1: float) -> float:
    n = n1 + n2
    variance = n1 * n2 / 12 * ((n + 1) - _tie_term(ranks) / (n * (n - 1)))
    if variance <= 0:
        return 1.0
    z = max(abs(u1 - n1 * n2 / 2) - 0.5, 0.0) / math.sqrt(variance)
    return min(1.0, math.erfc(z / math.sqrt(2)))


def mann_whitney_u(a: Sequence[float], b: Sequence[float]) -> UTestResult:
    """Two-sided Mann-Whitney U test.

    Small samples (n1 + n2 <= 16) get the exact permutation p-value: the share
    of all splits of the pooled midranks whose U1 lies at least as far from
    n1*n2/2 as the observed one.  Larger samples use the normal approximation
    with tie-corrected variance and a 0.5 continuity correction.
    """
    n1, n2 = len(a), len(b)
    if n1 == 0 or n2 == 0:
        raise ValueError("both samples must be non-empty")
    ranks = midranks(list(a) + list(b))
    u1 = float(ranks[:n1].sum() - n1 * (n1 + 1) / 2)
    u = min(u1, n1 * n2 - u1)
    if use_exact(n1, n2):
        return UTestResult(u, _exact_p(ranks, n1, u1), "exact", n1, n2)
    return UTestResult(u, _normal_p(ranks, n1, n2, u1), "normal_approx", n1, n2)


def significant_gain(base: Sequence[float], patched: Sequence[float], alpha: float = 0.1) -> float:
    """Percent speedup of ``patched`` over ``base``, or 0 unless it is a significant improvement."""
    if len(base) < 2 or len(patched) < 2:
        raise ValueError("need at least two measurements on each side")
    base_mean = float(np.mean(base))
    patched_mean = float(np.mean(patched))
    if base_mean <= 0:
        raise ValueError("base runtime mean must be positive")
    if patched_mean >= base_mean:
        return 0.0
    if mann_whitney_u(base, patched).p_value >= alpha:
        return 0.0
    return 100.0 * (base_mean - patched_mean) / base_mean
