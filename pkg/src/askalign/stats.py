"""Evaluation statistics.

Win-rate with order permutation and split credit, diagnostic error
reduction, chance-corrected agreement (Gwet's AC1 with variance and CI,
Fleiss' kappa), majority-vote ranking matrices, and percentile bootstrap
intervals. Everything here is a pure function over in-memory data.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field
from typing import Callable, Mapping, Optional, Sequence

import numpy as np
from scipy.stats import norm

from .corpus import CompleteFn
from .gateway import GenParams
from .judging import JUDGE_PARAMS, compare_candidates

logger = logging.getLogger(__name__)


class StatsError(Exception):
    pass


class DegenerateMatrixError(StatsError):
    pass


# ---------------------------------------------------------------------------
# Ratings data
# ---------------------------------------------------------------------------

@dataclass
class RatingsMatrix:
    """Items x raters categorical ratings; None marks a missing cell."""

    items: list[str]
    raters: list[str]
    cells: dict[tuple[str, str], str] = field(default_factory=dict)
    categories: tuple[str, ...] = ()

    def __post_init__(self):
        observed = sorted({v for v in self.cells.values()})
        if not self.categories:
            self.categories = tuple(observed)
        unknown = set(observed) - set(self.categories)
        if unknown:
            raise StatsError(f"ratings outside declared categories: "
                             f"{sorted(unknown)}")
        if len(self.raters) < 2:
            raise StatsError("agreement statistics need at least 2 raters")

    @staticmethod
    def from_rows(rows: Sequence[Sequence[Optional[str]]],
                  items: Optional[Sequence[str]] = None,
                  raters: Optional[Sequence[str]] = None,
                  categories: Sequence[str] = ()) -> "RatingsMatrix":
        n_items = len(rows)
        n_raters = len(rows[0]) if rows else 0
        items = list(items) if items else [f"item{i}" for i in range(n_items)]
        raters = list(raters) if raters else [f"rater{j}" for j in range(n_raters)]
        cells = {}
        for i, row in enumerate(rows):
            if len(row) != n_raters:
                raise StatsError(f"row {i} has {len(row)} cells, expected {n_raters}")
            for j, value in enumerate(row):
                if value is not None:
                    cells[(items[i], raters[j])] = str(value)
        return RatingsMatrix(items=items, raters=raters, cells=cells,
                             categories=tuple(categories))

    @staticmethod
    def load(path) -> "RatingsMatrix":
        """Matrix file: {items, raters, categories, rows} with null gaps."""
        from .jsonl import load_json

        d = load_json(path)
        return RatingsMatrix.from_rows(d["rows"], items=d.get("items"),
                                       raters=d.get("raters"),
                                       categories=d.get("categories", ()))

    def count_table(self) -> np.ndarray:
        """Items x categories table of rating counts."""
        index = {c: k for k, c in enumerate(self.categories)}
        table = np.zeros((len(self.items), len(self.categories)), dtype=np.int64)
        for (item, _rater), value in self.cells.items():
            table[self.items.index(item), index[value]] += 1
        return table

    def ratings_per_item(self) -> np.ndarray:
        return self.count_table().sum(axis=1)


# ---------------------------------------------------------------------------
# Chance-corrected agreement
# ---------------------------------------------------------------------------

@dataclass
class Ac1Result:
    ac1: float
    pa: float
    pe: float
    std_err: float
    ci_low: float
    ci_high: float
    p_value: float

    def to_dict(self) -> dict:
        return {"ac1": self.ac1, "pa": self.pa, "pe": self.pe,
                "std_err": self.std_err, "ci_low": self.ci_low,
                "ci_high": self.ci_high, "p_value": self.p_value}


def gwet_ac1(matrix: RatingsMatrix, confidence: float = 0.95) -> Ac1Result:
    """Gwet's first-order agreement coefficient.

    pa is the average pairwise agreement across items with at least two
    ratings; pe = sum_k pi_k (1 - pi_k) / (q - 1) where pi_k is the mean
    per-item proportion of ratings in category k and q the category count;
    AC1 = (pa - pe) / (1 - pe). The variance uses the standard linearized
    estimator for an infinite item population, with a normal-approximation
    CI and a one-sided p-value for AC1 > 0. Items with missing ratings are
    allowed; they contribute to pe (and to pa when twice-rated).
    """
    q = len(matrix.categories)
    if q < 2:
        raise DegenerateMatrixError(
            "undefined coefficient: fewer than two categories")
    table = matrix.count_table().astype(np.float64)
    ri = table.sum(axis=1)
    rated = ri >= 1
    table, ri = table[rated], ri[rated]
    n = len(table)
    scored = ri >= 2
    n2 = int(scored.sum())
    if n2 == 0:
        raise DegenerateMatrixError(
            "undefined coefficient: no item carries two or more ratings")

    agree = (table * (table - 1)).sum(axis=1)
    denom = np.where(scored, ri * (ri - 1), 1.0)
    pa_i = np.where(scored, agree / denom, 0.0)
    pa = float(pa_i[scored].sum() / n2)

    shares = table / ri[:, None]
    pi = shares.mean(axis=0)
    pe = float((pi * (1.0 - pi)).sum() / (q - 1))
    if pe >= 1.0:
        raise DegenerateMatrixError("undefined coefficient: pe = 1")
    ac1 = (pa - pe) / (1.0 - pe)

    # Linearized per-item components for the variance.
    pa_ivec = np.where(scored, pa_i * (n / n2), 0.0)
    pe_r2 = np.where(scored, pe, 0.0)
    ac1_ivec = (pa_ivec - pe_r2) / (1.0 - pe)
    pe_ivec = (shares @ (1.0 - pi)) / (q - 1)
    ac1_star = ac1_ivec - 2.0 * (1.0 - ac1) * (pe_ivec - pe) / (1.0 - pe)
    if n > 1:
        var = float(((ac1_star - ac1) ** 2).sum() / (n * (n - 1)))
    else:
        var = 0.0
    se = float(np.sqrt(max(var, 0.0)))

    z = float(norm.ppf(0.5 + confidence / 2.0))
    ci_low = max(-1.0, ac1 - z * se)
    ci_high = min(1.0, ac1 + z * se)
    if se > 0:
        p_value = float(1.0 - norm.cdf(ac1 / se))
    else:
        p_value = 0.0 if ac1 > 0 else 1.0
    return Ac1Result(ac1=float(ac1), pa=pa, pe=pe, std_err=se,
                     ci_low=ci_low, ci_high=ci_high, p_value=p_value)


@dataclass
class FleissResult:
    kappa: float
    pa: float
    pe: float


def fleiss_kappa(matrix: RatingsMatrix) -> FleissResult:
    """Fleiss' multi-rater kappa; requires the same number of ratings on
    every item (two or more)."""
    if len(matrix.categories) < 2:
        raise DegenerateMatrixError(
            "undefined coefficient: fewer than two categories")
    table = matrix.count_table().astype(np.float64)
    ri = table.sum(axis=1)
    if len(set(ri.tolist())) != 1 or ri[0] < 2:
        raise StatsError(
            "Fleiss' kappa requires an equal number (>= 2) of ratings per "
            "item; use gwet_ac1 for unbalanced matrices")
    r = float(ri[0])
    n = len(table)
    p_i = ((table ** 2).sum(axis=1) - r) / (r * (r - 1))
    pa = float(p_i.mean())
    p_j = table.sum(axis=0) / (n * r)
    pe = float((p_j ** 2).sum())
    if pe >= 1.0:
        if pa >= 1.0:
            return FleissResult(kappa=1.0, pa=pa, pe=pe)
        raise DegenerateMatrixError("undefined coefficient: pe = 1")
    return FleissResult(kappa=(pa - pe) / (1.0 - pe), pa=pa, pe=pe)


# ---------------------------------------------------------------------------
# Win-rate with order permutation
# ---------------------------------------------------------------------------

@dataclass
class WinRateResult:
    wins: float
    comparisons: int
    details: list[dict] = field(default_factory=list)
    failures: list[dict] = field(default_factory=list)

    @property
    def rate(self) -> float:
        return 100.0 * self.wins / self.comparisons if self.comparisons else 0.0

    def to_dict(self) -> dict:
        return {"wins": self.wins, "comparisons": self.comparisons,
                "rate": self.rate, "failures": len(self.failures)}


def winrate(contexts: Sequence[str],
            candidate: Callable[[str], str],
            baseline: Callable[[str], str],
            judge: CompleteFn,
            dimension: str = "overall",
            aux_by_context: Optional[Mapping[str, Mapping[str, str]]] = None,
            judge_params: GenParams = JUDGE_PARAMS) -> WinRateResult:
    """Percent of contexts where the candidate's question beats the baseline's.

    Each pair is judged in both presentation orders. Credit per context:
    1 if the candidate wins both orders, 0 if it loses both, 0.5 on a
    split. Identical generations score 0.5 directly, which makes comparing
    an endpoint against itself exactly 50%.
    """
    if not contexts:
        raise StatsError("winrate needs at least one context")
    aux_by_context = aux_by_context or {}
    result = WinRateResult(wins=0.0, comparisons=0)
    for context in contexts:
        try:
            q_cand = candidate(context)
            q_base = baseline(context)
            if q_cand == q_base:
                credit = 0.5
                outcome = "identical"
            else:
                verdicts = compare_candidates(
                    context, [("candidate", q_cand), ("baseline", q_base)],
                    dimension, judge, aux=aux_by_context.get(context),
                    params=judge_params)
                prefs = [v.prefers("candidate", "baseline") for v in verdicts]
                if all(prefs):
                    credit, outcome = 1.0, "win"
                elif not any(prefs):
                    credit, outcome = 0.0, "loss"
                else:
                    credit, outcome = 0.5, "split"
        except Exception as exc:  # noqa: BLE001 - failures excluded, counted
            result.failures.append({"context": context[:80], "error": str(exc)})
            logger.warning("winrate item failed: %s", exc)
            continue
        result.wins += credit
        result.comparisons += 1
        result.details.append({"context": context[:80], "credit": credit,
                               "outcome": outcome})
    return result


def error_reduction(acc_base: float, acc_new: float) -> float:
    """Relative reduction of the error rate, in percent.

    100 * ((100 - base) - (100 - new)) / (100 - base). A perfect baseline
    leaves nothing to reduce; that case is defined as 0 with a warning.
    """
    for name, value in (("acc_base", acc_base), ("acc_new", acc_new)):
        if not 0.0 <= value <= 100.0:
            raise StatsError(f"{name} must be within [0, 100], got {value}")
    if acc_base == 100.0:
        warnings.warn("error_reduction undefined for a perfect baseline; "
                      "returning 0", stacklevel=2)
        return 0.0
    return 100.0 * (acc_new - acc_base) / (100.0 - acc_base)


# ---------------------------------------------------------------------------
# Majority-vote ranking aggregation
# ---------------------------------------------------------------------------

@dataclass
class MajorityVoteResult:
    candidates: tuple[str, ...]
    matrix: dict[str, dict[str, float]]
    baseline_winrates: dict[str, float] = field(default_factory=dict)

    def cell(self, winner: str, loser: str) -> float:
        return self.matrix[winner][loser]


def majority_vote_rankings(rankings: Sequence[Sequence[Sequence[str]]],
                           baseline: Optional[str] = None) -> MajorityVoteResult:
    """Pairwise win matrix from per-rater full rankings.

    rankings[item][rater] is an ordered best-to-worst candidate list; every
    ranking must be a permutation of the same candidate set (no ties, no
    omissions). Candidate i beats j on an item when a majority of raters
    rank i above j; an exact split (even rater count) counts 0.5. Cells are
    the percentage of items won, so cell(i, j) + cell(j, i) = 100.
    """
    if not rankings or not rankings[0]:
        raise StatsError("rankings must cover at least one item and rater")
    candidate_set = sorted(rankings[0][0])
    for i, item in enumerate(rankings):
        for j, ranking in enumerate(item):
            if sorted(ranking) != candidate_set:
                raise StatsError(
                    f"item {i}, rater {j}: ranking {list(ranking)} is not a "
                    f"permutation of {candidate_set}")
    candidates = tuple(candidate_set)
    if baseline is not None and baseline not in candidates:
        raise StatsError(f"baseline {baseline!r} is not a candidate")

    wins = {a: {b: 0.0 for b in candidates if b != a} for a in candidates}
    n_items = len(rankings)
    for item in rankings:
        positions = [
            {cand: ranking.index(cand) for cand in candidates}
            for ranking in item
        ]
        n_raters = len(item)
        for a in candidates:
            for b in candidates:
                if a >= b:
                    continue
                votes_a = sum(1 for pos in positions if pos[a] < pos[b])
                if votes_a * 2 > n_raters:
                    wins[a][b] += 1.0
                elif votes_a * 2 == n_raters:
                    wins[a][b] += 0.5
                    wins[b][a] += 0.5
                else:
                    wins[b][a] += 1.0

    matrix = {a: {b: 100.0 * wins[a][b] / n_items for b in wins[a]}
              for a in candidates}
    baseline_winrates = {}
    if baseline is not None:
        baseline_winrates = {a: matrix[a][baseline]
                             for a in candidates if a != baseline}
    return MajorityVoteResult(candidates=candidates, matrix=matrix,
                              baseline_winrates=baseline_winrates)


# ---------------------------------------------------------------------------
# Bootstrap
# ---------------------------------------------------------------------------

def bootstrap_ci(samples: Sequence[float],
                 statistic: str | Callable[[np.ndarray], float] = "mean",
                 n_resamples: int = 10_000, seed: int = 0,
                 confidence: float = 0.95) -> tuple[float, float]:
    """Percentile bootstrap interval, deterministic under the seed."""
    if len(samples) < 2:
        raise StatsError("bootstrap_ci needs at least 2 samples")
    if n_resamples < 100:
        warnings.warn(f"n_resamples={n_resamples} is low for a stable "
                      "interval", stacklevel=2)
    if statistic == "mean":
        stat_fn = np.mean
    elif callable(statistic):
        stat_fn = statistic
    else:
        raise StatsError(f"unknown statistic {statistic!r}")
    data = np.asarray(samples, dtype=np.float64)
    rng = np.random.default_rng(seed)
    idx = rng.integers(0, len(data), size=(n_resamples, len(data)))
    stats = np.apply_along_axis(stat_fn, 1, data[idx])
    alpha = (1.0 - confidence) / 2.0
    low, high = np.quantile(stats, [alpha, 1.0 - alpha])
    return float(low), float(high)
