"""Cohort-level confusion counts, P/R/F1 averaging, hallucination measures and query categories."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

from acr.cohort import Cohort

DEFAULT_ALPHA = 50
DEFAULT_BETA = 10

BROAD, NARROW, SPARSE, ZERO = "Broad", "Narrow", "Sparse", "ZeroResult"
CATEGORIES = (BROAD, NARROW, SPARSE, ZERO)


class MetricError(ValueError):
    pass


class UndefinedForZeroResult(MetricError):
    """HR has no denominator for an empty gold cohort; use :func:`fp_count` instead."""


def categorize(gold_size: int, alpha: int = DEFAULT_ALPHA, beta: int = DEFAULT_BETA) -> str:
    if not 1 <= beta < alpha:
        raise MetricError(f"thresholds must satisfy 1 <= beta < alpha (got alpha={alpha}, beta={beta})")
    if gold_size < 0:
        raise MetricError("gold size cannot be negative")
    if gold_size >= alpha:
        return BROAD
    if gold_size >= beta:
        return NARROW
    if gold_size >= 1:
        return SPARSE
    return ZERO


@dataclass(frozen=True)
class Confusion:
    tp: int
    fp: int
    fn: int
    tn: int | None = None

    @property
    def precision(self) -> float:
        return _ratio(self.tp, self.tp + self.fp)

    @property
    def recall(self) -> float:
        return _ratio(self.tp, self.tp + self.fn)

    @property
    def f1(self) -> float:
        return f1_score(self.precision, self.recall)

    @property
    def fpr(self) -> float | None:
        if self.tn is None:
            return None
        return _ratio(self.fp, self.fp + self.tn)

    def to_json(self) -> dict:
        return {"tp": self.tp, "fp": self.fp, "fn": self.fn, "tn": self.tn}


def _ratio(num: float, den: float) -> float:
    return num / den if den else 0.0


def f1_score(p: float, r: float) -> float:
    return 2 * p * r / (p + r) if p + r else 0.0


def confusion(pred: Cohort | Iterable[str], gold: Cohort | Iterable[str],
              population: Iterable[str] | None = None) -> Confusion:
    pred_s, gold_s = set(pred), set(gold)
    tn = None
    if population is not None:
        pop = set(population)
        stray = (pred_s | gold_s) - pop
        if stray:
            raise MetricError(f"{len(stray)} patient(s) outside the population, e.g. {sorted(stray)[0]!r}")
        tn = len(pop - pred_s - gold_s)
    return Confusion(len(pred_s & gold_s), len(pred_s - gold_s), len(gold_s - pred_s), tn)


def macro_prf(confusions: Sequence[Confusion]) -> tuple[float, float, float]:
    """Unweighted mean of per-query P, R and F1 (undefined ratios count as 0)."""
    if not confusions:
        raise MetricError("macro average over an empty query set")
    n = len(confusions)
    return (sum(c.precision for c in confusions) / n,
            sum(c.recall for c in confusions) / n,
            sum(c.f1 for c in confusions) / n)


def micro_prf(confusions: Sequence[Confusion]) -> tuple[float, float, float]:
    if not confusions:
        raise MetricError("micro average over an empty query set")
    total = Confusion(sum(c.tp for c in confusions), sum(c.fp for c in confusions),
                      sum(c.fn for c in confusions))
    return total.precision, total.recall, total.f1


def hallucination_ratio(c: Confusion) -> float:
    """False positives per actual gold answer; a ratio, unbounded above."""
    if c.tp + c.fn == 0:
        raise UndefinedForZeroResult("hallucination ratio is undefined for zero-result queries; use fp_count")
    return c.fp / (c.tp + c.fn)


def fp_count(pred: Cohort | Iterable[str], gold: Cohort | Iterable[str]) -> int:
    return len(set(pred) - set(gold))


def oracle_topk(ranked_pred: Cohort, gold: Cohort | Iterable[str],
                population: Iterable[str] | None = None) -> Confusion:
    """Score only the first |gold| ranked patients."""
    if ranked_pred.ranking is None:
        raise MetricError("oracle top-k needs a ranked prediction")
    gold_s = set(gold)
    kept = ranked_pred.ranking[:len(gold_s)]
    return confusion(kept, gold_s, population)
