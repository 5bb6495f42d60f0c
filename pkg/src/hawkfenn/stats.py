"""Nonparametric comparison of optimizer results.

Smaller fitness is better everywhere.  The rank-sum test is two-sided; for
small samples the null distribution of the rank sum is built exactly by
dynamic programming over the (doubled, hence integer) mid-ranks, so ties
are handled without approximation.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np
from scipy.stats import rankdata

from .errors import ContractViolation

EXACT_MAX_MIN_N = 8
ALPHA = 0.05


@dataclass(frozen=True)
class SampleSet:
    values: np.ndarray
    label: str = ""

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 1 or v.size == 0:
            raise ContractViolation("a sample set needs at least one value")
        if not np.all(np.isfinite(v)):
            raise ContractViolation(f"sample set {self.label!r} contains non-finite values")
        object.__setattr__(self, "values", v)


@dataclass(frozen=True)
class RankSumResult:
    statistic: float  # rank sum of the first sample
    p_value: float  # NaN when degenerate
    method: str  # "exact", "normal" or "degenerate"
    first_better: bool = False  # first sample ranks lower than expected

    @property
    def degenerate(self) -> bool:
        return self.method == "degenerate"


def _values(x) -> np.ndarray:
    return x.values if isinstance(x, SampleSet) else SampleSet(x).values


def _exact_two_sided(doubled: np.ndarray, k: int, observed: int) -> float:
    """P(|S - E S| >= |observed - E S|) where S sums k of the doubled ranks."""
    n = doubled.size
    smax = int(np.sort(doubled)[-k:].sum()) if k else 0
    ways = np.zeros((k + 1, smax + 1))
    ways[0, 0] = 1.0
    for r in doubled.astype(int):
        # add item r to every partial selection; rows updated from the top down
        ways[1:, r:] += ways[:-1, : smax + 1 - r].copy()
    total = math.comb(n, k)
    centre2 = 2 * k * (n + 1)  # twice the expected doubled sum
    sums = np.arange(smax + 1)
    dev = np.abs(2 * sums - centre2)
    extreme = dev >= abs(2 * observed - centre2)
    return min(1.0, float(ways[k, extreme].sum() / total))


def wilcoxon_rank_sum(a, b, method: str = "auto") -> RankSumResult:
    """Two-sided Wilcoxon rank-sum test of samples ``a`` and ``b``.

    ``method="auto"`` enumerates the exact null distribution when the
    smaller sample has at most 8 values and otherwise uses the normal
    approximation with tie-corrected variance and a 0.5 continuity
    correction.  A constant pooled sample yields ``p_value = nan`` and
    ``method = "degenerate"``.
    """
    a, b = _values(a), _values(b)
    na, nb = a.size, b.size
    n = na + nb
    pooled = np.concatenate([a, b])
    ranks = rankdata(pooled)
    w = float(ranks[:na].sum())
    expected = na * (n + 1) / 2.0
    first_better = w < expected
    if np.all(pooled == pooled[0]):
        return RankSumResult(w, float("nan"), "degenerate")

    if method == "auto":
        method = "exact" if min(na, nb) <= EXACT_MAX_MIN_N else "normal"
    if method == "exact":
        doubled = np.rint(2 * ranks).astype(int)
        # enumerate over the smaller group; |deviation| is the same for both
        if na <= nb:
            p = _exact_two_sided(doubled, na, int(doubled[:na].sum()))
        else:
            p = _exact_two_sided(doubled, nb, int(doubled[na:].sum()))
    elif method == "normal":
        _, counts = np.unique(pooled, return_counts=True)
        tie = float(np.sum(counts**3 - counts)) / (n * (n - 1))
        var = na * nb / 12.0 * ((n + 1) - tie)
        z = max(abs(w - expected) - 0.5, 0.0) / math.sqrt(var)
        p = math.erfc(z / math.sqrt(2.0))
    else:
        raise ContractViolation(f"unknown method {method!r}")
    return RankSumResult(w, p, method, first_better)


@dataclass(frozen=True)
class RankTable:
    """Mean final fitness per (function, algorithm)."""

    functions: tuple
    algorithms: tuple
    values: np.ndarray  # shape (len(functions), len(algorithms))

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != (len(self.functions), len(self.algorithms)):
            raise ContractViolation("values shape does not match labels")
        object.__setattr__(self, "values", v)


@dataclass(frozen=True)
class FriedmanResult:
    ranks: np.ndarray  # per-function ranks, same shape as the table
    mean_rank: dict
    ordering: list


def friedman_mean_rank(table: RankTable) -> FriedmanResult:
    """Rank algorithms per function (1 = lowest fitness, ties averaged)."""
    v = table.values
    if v.shape[0] < 2 or v.shape[1] < 2:
        raise ContractViolation("need at least 2 functions and 2 algorithms")
    if not np.all(np.isfinite(v)):
        raise ContractViolation("rank table contains non-finite cells")
    ranks = np.vstack([rankdata(row) for row in v])
    mean = ranks.mean(axis=0)
    mean_rank = {alg: float(m) for alg, m in zip(table.algorithms, mean)}
    ordering = [table.algorithms[i] for i in np.argsort(mean, kind="stable")]
    return FriedmanResult(ranks, mean_rank, ordering)


@dataclass(frozen=True)
class Summary:
    mean: float
    std: float
    n: int

    @property
    def single_run(self) -> bool:
        return self.n == 1


def summarize(runs) -> Summary:
    """Mean and sample standard deviation (n - 1) of final fitness values.

    Accepts ``RunRecord`` objects or plain numbers.  A single run reports
    ``std = 0`` with ``single_run`` set.
    """
    vals = np.array([getattr(r, "final_fitness", r) for r in runs], dtype=float)
    if vals.size == 0:
        raise ContractViolation("summarize needs at least one run")
    std = float(np.std(vals, ddof=1)) if vals.size > 1 else 0.0
    return Summary(float(np.mean(vals)), std, int(vals.size))


def winner_sign(result: RankSumResult, alpha: float = ALPHA) -> str:
    """'+' if the first sample is significantly better, '-' if worse, else '='."""
    if result.degenerate or result.p_value >= alpha:
        return "="
    return "+" if result.first_better else "-"


@dataclass(frozen=True)
class ComparisonRow:
    function: str
    algorithm: str
    p_value: float
    winner: str


def compare(samples: Mapping[str, Mapping[str, Sequence[float]]], reference: str,
            alpha: float = ALPHA) -> tuple[list[ComparisonRow], FriedmanResult | None]:
    """Compare ``reference`` against every other algorithm on every function.

    ``samples[function][algorithm]`` holds final fitness values per run.
    Returns per-(function, algorithm) rows and the Friedman ranking of mean
    fitness over all algorithms, or ``None`` for the ranking when there is
    only one function.
    """
    functions = sorted(samples)
    algorithms = sorted({a for f in functions for a in samples[f]})
    for f in functions:
        if set(samples[f]) != set(algorithms):
            raise ContractViolation(f"function {f!r} lacks results for some algorithms")
    if reference not in algorithms:
        raise ContractViolation(f"reference {reference!r} not among {algorithms}")
    algorithms = [reference] + [a for a in algorithms if a != reference]
    rows = []
    for f in functions:
        ref = samples[f][reference]
        for alg in algorithms[1:]:
            res = wilcoxon_rank_sum(ref, samples[f][alg])
            rows.append(ComparisonRow(f, alg, res.p_value, winner_sign(res, alpha)))
    if len(functions) < 2:
        return rows, None
    table = RankTable(tuple(functions), tuple(algorithms),
                      np.array([[np.mean(samples[f][a]) for a in algorithms] for f in functions]))
    return rows, friedman_mean_rank(table)


def comparison_csv(rows: Sequence[ComparisonRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["function", "algorithm", "p_value", "winner"])
    for r in rows:
        w.writerow([r.function, r.algorithm, "NaN" if math.isnan(r.p_value) else f"{r.p_value:.6g}", r.winner])
    return buf.getvalue()


def tally(rows: Sequence[ComparisonRow]) -> dict:
    """Per-algorithm '+/=/-' counts, as in a winner/equal/loser footer."""
    out: dict = {}
    for r in rows:
        c = out.setdefault(r.algorithm, {"+": 0, "=": 0, "-": 0})
        c[r.winner] += 1
    return out
