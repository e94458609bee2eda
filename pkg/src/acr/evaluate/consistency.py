"""Gold-free set-theoretic consistency checks driven by query-bank relations."""

from __future__ import annotations

from dataclasses import dataclass
from decimal import ROUND_HALF_UP, Decimal
from typing import Iterable, Mapping

from acr.cohort import Cohort
from acr.squerl.bank import QueryRecord


def pct(part: int, whole: int) -> float:
    return 100.0 * part / whole if whole else 0.0


def display_pct(value: float) -> int:
    """Round half away from zero for display."""
    return int(Decimal(str(value)).quantize(Decimal(1), rounding=ROUND_HALF_UP))


def paraphrase_check(a: Iterable[str], b: Iterable[str]) -> tuple[int, int, float, float]:
    """(|A-B|, |B-A|, |A-B| as % of A, |B-A| as % of B)."""
    sa, sb = set(a), set(b)
    a_only, b_only = len(sa - sb), len(sb - sa)
    return a_only, b_only, pct(a_only, len(sa)), pct(b_only, len(sb))


def intersection_check(base: Iterable[str], complex_: Iterable[str]) -> int:
    """Patients in the complex query's cohort but not in its base cohort."""
    return len(set(complex_) - set(base))


def subtype_check(parent: Iterable[str], child: Iterable[str]) -> int:
    return len(set(child) - set(parent))


@dataclass
class ConsistencyRow:
    kind: str
    query_a: str
    query_b: str
    size_a: int
    size_b: int
    violations: int
    violations_b: int = 0
    pct_a: float = 0.0
    pct_b: float = 0.0

    def to_json(self) -> dict:
        return dict(self.__dict__)


def run_consistency(bank: Iterable[QueryRecord], cohorts: Mapping[str, Cohort]) -> list[ConsistencyRow]:
    """Evaluate every relation in the bank; for paraphrases ``violations`` is |A-B| and ``violations_b`` |B-A|.

    For ``intersection_of``/``child_of``, query_a is the base/parent and query_b the
    complex/child, and percentages are relative to query_b's cohort.
    """
    rows = []
    for rec in bank:
        for kind, other in rec.relations:
            if rec.query_id not in cohorts or other not in cohorts:
                continue
            if kind == "paraphrase_of":
                a, b = cohorts[other], cohorts[rec.query_id]
                ab, ba, pa, pb = paraphrase_check(a, b)
                rows.append(ConsistencyRow(kind, other, rec.query_id, len(a), len(b), ab, ba, pa, pb))
            else:
                base, cplx = cohorts[other], cohorts[rec.query_id]
                v = intersection_check(base, cplx) if kind == "intersection_of" else subtype_check(base, cplx)
                rows.append(ConsistencyRow(kind, other, rec.query_id, len(base), len(cplx), v,
                                           pct_b=pct(v, len(cplx))))
    return rows


def total_violations(rows: Iterable[ConsistencyRow]) -> int:
    return sum(r.violations + r.violations_b for r in rows)
