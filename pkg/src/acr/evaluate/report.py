"""Stratified evaluation reports: JSON (canonical), markdown tables and a per-query CSV."""

from __future__ import annotations

import csv
import io
from typing import Mapping, Sequence

from acr.cohort import EMPTY, Cohort
from acr.evaluate.consistency import ConsistencyRow, display_pct
from acr.evaluate.gold import GoldMatrix
from acr.evaluate.metrics import (
    BROAD,
    DEFAULT_ALPHA,
    DEFAULT_BETA,
    NARROW,
    SPARSE,
    ZERO,
    Confusion,
    categorize,
    confusion,
    hallucination_ratio,
    macro_prf,
    micro_prf,
    oracle_topk,
)
from acr.io import TOOL_VERSION
from acr.squerl.bank import EXPERT_CLASSES, QueryRecord

AVERAGING = {BROAD: "macro", NARROW: "macro", SPARSE: "micro"}
TERCILES = ("bottom", "middle", "top")


def _prf(confusions: Sequence[Confusion], mode: str) -> dict | None:
    if not confusions:
        return None
    p, r, f = (macro_prf if mode == "macro" else micro_prf)(confusions)
    return {"precision": p, "recall": r, "f1": f}


def doc_count_terciles(doc_counts: Mapping[str, int]) -> tuple[dict[str, str], list[int]]:
    """Split patients into three near-equal groups by document count (ties by patient_id).

    Returns the membership and the empirical N_d lower bounds of the middle and top groups.
    """
    order = sorted(doc_counts, key=lambda p: (doc_counts[p], p))
    n = len(order)
    cuts = [0, n // 3, (2 * n) // 3, n]
    member = {}
    for t, name in enumerate(TERCILES):
        for pid in order[cuts[t]:cuts[t + 1]]:
            member[pid] = name
    bounds = [doc_counts[order[c]] if c < n else 0 for c in cuts[1:3]]
    return member, bounds


def stratify(rows: Sequence[dict], preds: Mapping[str, Cohort], gold: GoldMatrix,
             doc_counts: Mapping[str, int] | None) -> dict:
    """Macro P/R/F1 per expert class and per document-count tercile over non-empty-gold queries."""
    out: dict = {"expert_class": {}}
    scored = [r for r in rows if r["category"] != ZERO]
    for cls in EXPERT_CLASSES:
        conf = [Confusion(r["tp"], r["fp"], r["fn"]) for r in scored if r["expert_class"] == cls]
        out["expert_class"][cls] = {"n_queries": len(conf), "macro": _prf(conf, "macro")}
    if doc_counts:
        member, bounds = doc_count_terciles(doc_counts)
        terc: dict = {"boundaries": bounds, "groups": {}}
        for name in TERCILES:
            stratum = {p for p, t in member.items() if t == name}
            conf = []
            for r in scored:
                g = gold.gold[r["query_id"]].patient_ids & stratum
                if not g:
                    continue
                p = preds.get(r["query_id"], EMPTY).patient_ids & stratum
                conf.append(confusion(p, g))
            terc["groups"][name] = {"n_patients": len(stratum), "n_queries": len(conf),
                                    "macro": _prf(conf, "macro")}
        out["doc_count_tercile"] = terc
    return out


def build_report(bank: Sequence[QueryRecord], gold: GoldMatrix, preds: Mapping[str, Cohort], *,
                 system: str = "", alpha: int = DEFAULT_ALPHA, beta: int = DEFAULT_BETA,
                 doc_counts: Mapping[str, int] | None = None, config_hash: str = "",
                 seed: int | None = None, consistency: Sequence[ConsistencyRow] | None = None) -> dict:
    gold.check_covers(r.query_id for r in bank)
    population = gold.population
    rows = []
    by_cat: dict[str, list[Confusion]] = {BROAD: [], NARROW: [], SPARSE: []}
    oracle_by_cat: dict[str, list[Confusion]] = {BROAD: [], NARROW: [], SPARSE: []}
    zero_fp: dict[str, int] = {}
    hr: dict[str, float] = {}
    for rec in bank:
        g = gold.gold[rec.query_id]
        pred = preds.get(rec.query_id, EMPTY)
        cat = categorize(len(g), alpha, beta)
        c = confusion(pred, g, population)
        row = {
            "query_id": rec.query_id,
            "category": cat,
            "expert_class": rec.expert_class,
            "gold_size": len(g),
            "pred_size": len(pred),
            **c.to_json(),
            "precision": c.precision,
            "recall": c.recall,
            "f1": c.f1,
            "fpr": c.fpr,
            "hr": None,
        }
        if cat == ZERO:
            zero_fp[rec.query_id] = c.fp
        else:
            row["hr"] = hr[rec.query_id] = hallucination_ratio(c)
            by_cat[cat].append(c)
            if pred.ranking is not None:
                oc = oracle_topk(pred, g, population)
                oracle_by_cat[cat].append(oc)
                row["oracle"] = {**oc.to_json(), "precision": oc.precision, "recall": oc.recall, "f1": oc.f1}
        rows.append(row)
    categories = {}
    for cat, mode in AVERAGING.items():
        categories[cat] = {
            "n_queries": len(by_cat[cat]),
            "averaging": mode,
            "cohort_retrieval": _prf(by_cat[cat], mode),
            "oracle_topk": _prf(oracle_by_cat[cat], mode),
        }
    report = {
        "metadata": {
            "system": system,
            "config_hash": config_hash,
            "seed": seed,
            "tool_version": TOOL_VERSION,
            "alpha": alpha,
            "beta": beta,
            "n_queries": len(rows),
            "population_size": len(population),
            "query_ids": [r.query_id for r in bank],
        },
        "categories": categories,
        "zero_result": {
            "n_queries": len(zero_fp),
            "fp_counts": zero_fp,
            "queries_with_fp": sum(1 for v in zero_fp.values() if v > 0),
        },
        "hallucination_ratio": hr,
        "strata": stratify(rows, preds, gold, doc_counts),
        "per_query": rows,
    }
    if consistency is not None:
        report["consistency"] = [r.to_json() for r in consistency]
    return report


# -- rendering -----------------------------------------------------------------

def _fmt(v) -> str:
    return "-" if v is None else f"{100 * v:.1f}"


def _prf_cells(d: dict | None) -> list[str]:
    if d is None:
        return ["-", "-", "-"]
    return [_fmt(d["precision"]), _fmt(d["recall"]), _fmt(d["f1"])]


def render_comparison(reports: Sequence[dict]) -> str:
    """Systems as rows, Broad/Narrow/Sparse x (cohort retrieval | oracle top-k) as columns, in percent."""
    head = "| System | Category | Avg | #Q | P | R | F1 | Oracle P | Oracle R | Oracle F1 |"
    lines = [head, "|" + "---|" * 10]
    for cat in (BROAD, NARROW, SPARSE):
        for rep in reports:
            c = rep["categories"][cat]
            lines.append("| " + " | ".join([rep["metadata"]["system"] or "?", cat, c["averaging"],
                                             str(c["n_queries"]), *_prf_cells(c["cohort_retrieval"]),
                                             *_prf_cells(c["oracle_topk"])]) + " |")
    return "\n".join(lines) + "\n"


def render_markdown(report: dict) -> str:
    meta = report["metadata"]
    out = [f"# Evaluation report: {meta['system'] or 'unnamed system'}", "",
           f"config `{meta['config_hash']}`, seed {meta['seed']}, alpha={meta['alpha']}, beta={meta['beta']}, "
           f"{meta['n_queries']} queries, {meta['population_size']} patients", "",
           "## Retrieval quality", "", render_comparison([report])]

    out += ["## Zero-result queries (false positives)", "", "| Query | FP |", "|---|---|"]
    out += [f"| {q} | {fp} |" for q, fp in report["zero_result"]["fp_counts"].items()]
    out += ["", f"{report['zero_result']['queries_with_fp']} of {report['zero_result']['n_queries']} "
                "zero-result queries have at least one false positive.", ""]

    out += ["## Hallucination ratio", "", "| Query | Category | Gold | HR |", "|---|---|---|---|"]
    cats = {r["query_id"]: (r["category"], r["gold_size"]) for r in report["per_query"]}
    out += [f"| {q} | {cats[q][0]} | {cats[q][1]} | {v:.3f} |" for q, v in report["hallucination_ratio"].items()]
    out.append("")

    strata = report["strata"]
    out += ["## Expert-driven classes (macro)", "", "| Class | #Q | P | R | F1 |", "|---|---|---|---|---|"]
    for cls, d in strata["expert_class"].items():
        out.append(f"| {cls} | {d['n_queries']} | " + " | ".join(_prf_cells(d["macro"])) + " |")
    out.append("")
    if "doc_count_tercile" in strata:
        t = strata["doc_count_tercile"]
        lo, hi = t["boundaries"]
        ranges = {"bottom": f"N_d < {lo}", "middle": f"{lo} <= N_d < {hi}", "top": f"N_d >= {hi}"}
        out += ["## Document-count terciles (macro)", "",
                "| Tercile | Range | Patients | #Q | P | R | F1 |", "|---|---|---|---|---|---|---|"]
        for name, d in t["groups"].items():
            out.append(f"| {name} | {ranges[name]} | {d['n_patients']} | {d['n_queries']} | "
                       + " | ".join(_prf_cells(d["macro"])) + " |")
        out.append("")
    if report.get("consistency"):
        out += [render_consistency(report["consistency"])]
    return "\n".join(out)


def render_consistency(rows: Sequence[dict]) -> str:
    out = ["## Set-theoretic consistency", "",
           "| Kind | Query A | Query B | A | B | Violations |", "|---|---|---|---|---|---|"]
    for r in rows:
        if r["kind"] == "paraphrase_of":
            v = (f"{r['violations_b']} ({display_pct(r['pct_b'])}% of B) / "
                 f"{r['violations']} ({display_pct(r['pct_a'])}% of A)")
        else:
            v = f"{r['violations']} ({display_pct(r['pct_b'])}% of B)"
        out.append(f"| {r['kind']} | {r['query_a']} | {r['query_b']} | {r['size_a']} | {r['size_b']} | {v} |")
    return "\n".join(out) + "\n"


CSV_FIELDS = ["query_id", "category", "expert_class", "gold_size", "pred_size", "tp", "fp", "fn", "tn",
              "precision", "recall", "f1", "fpr", "hr", "oracle_tp", "oracle_fp", "oracle_fn", "oracle_f1"]


def render_csv(report: dict) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=CSV_FIELDS, lineterminator="\n")
    w.writeheader()
    for r in report["per_query"]:
        row = {k: r.get(k) for k in CSV_FIELDS}
        o = r.get("oracle")
        if o:
            row.update(oracle_tp=o["tp"], oracle_fp=o["fp"], oracle_fn=o["fn"], oracle_f1=o["f1"])
        w.writerow(row)
    return buf.getvalue()
