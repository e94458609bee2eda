from acr.evaluate.consistency import (
    ConsistencyRow,
    intersection_check,
    paraphrase_check,
    run_consistency,
    subtype_check,
)
from acr.evaluate.gold import GoldMatrix, load_cohorts, save_cohorts
from acr.evaluate.metrics import (
    BROAD,
    CATEGORIES,
    NARROW,
    SPARSE,
    ZERO,
    Confusion,
    UndefinedForZeroResult,
    categorize,
    confusion,
    fp_count,
    hallucination_ratio,
    macro_prf,
    micro_prf,
    oracle_topk,
)
from acr.evaluate.report import build_report, doc_count_terciles, render_csv, render_markdown, stratify

__all__ = [
    "BROAD", "CATEGORIES", "NARROW", "SPARSE", "ZERO",
    "Confusion", "ConsistencyRow", "GoldMatrix", "UndefinedForZeroResult",
    "build_report", "categorize", "confusion", "doc_count_terciles", "fp_count", "hallucination_ratio",
    "intersection_check", "load_cohorts", "macro_prf", "micro_prf", "oracle_topk", "paraphrase_check",
    "render_csv", "render_markdown", "run_consistency", "save_cohorts", "stratify", "subtype_check",
]
