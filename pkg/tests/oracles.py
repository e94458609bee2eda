"""Independent reference implementations used only by the tests.

Each oracle is written from the definitions, deliberately without reusing the
library's fast paths (postings, numpy argpartition, set algebra on cohorts).
"""

from __future__ import annotations

import datetime as dt
import math

from acr.squerl.ast import And, Atom, Before, Except, Not, Or

STAGE_ORDER = ["0", "I", "II", "III", "IV"]


# -- ISA reasoning ---------------------------------------------------------------

def is_a(concept: str, target: str, parents: dict[str, tuple[str, ...]]) -> bool:
    """Walk parent links upward from ``concept`` looking for ``target``."""
    if concept == target:
        return True
    return any(is_a(p, target, parents) for p in parents.get(concept, ()))


def dfs_reachable(children: dict[str, list[str]], start: str) -> set[str]:
    seen = set()

    def visit(n):
        if n in seen:
            return
        seen.add(n)
        for c in children.get(n, ()):
            visit(c)

    visit(start)
    return seen


# -- eligibility -----------------------------------------------------------------

def _date(v):
    if v is None or isinstance(v, dt.date):
        return v
    return dt.date.fromisoformat(v)


def _filter_ok(f, attrs: dict, scales: dict[str, list[str]]) -> bool:
    if f.attribute not in attrs:
        return False
    actual, wanted = str(attrs[f.attribute]), f.value
    scale = scales.get(f.attribute)
    if scale and actual.upper() in scale and wanted.upper() in scale:
        a, b = scale.index(actual.upper()), scale.index(wanted.upper())
        return {"=": a == b, "!=": a != b, ">=": a >= b, "<=": a <= b}[f.op]
    if f.op == "=":
        return actual == wanted
    if f.op == "!=":
        return actual != wanted
    return False


def _atom_events(atom: Atom, events: list[dict], parents, scales) -> list[dict]:
    out = []
    for ev in events:
        if ev.get("status", "active") != "active":
            continue
        if ev.get("polarity", "asserted") != atom.polarity:
            continue
        if not is_a(ev["concept"], atom.concept, parents):
            continue
        if all(_filter_ok(f, ev.get("attributes") or {}, scales) for f in atom.filters):
            out.append(ev)
    return out


def eligible(ast, events: list[dict], parents, scales=None) -> bool:
    """Does one patient (given as a list of event dicts) satisfy the query?"""
    scales = scales if scales is not None else {"stage": STAGE_ORDER}
    if isinstance(ast, Atom):
        return bool(_atom_events(ast, events, parents, scales))
    if isinstance(ast, And):
        return eligible(ast.left, events, parents, scales) and eligible(ast.right, events, parents, scales)
    if isinstance(ast, Or):
        return eligible(ast.left, events, parents, scales) or eligible(ast.right, events, parents, scales)
    if isinstance(ast, Except):
        return eligible(ast.left, events, parents, scales) and not eligible(ast.right, events, parents, scales)
    if isinstance(ast, Not):
        return not eligible(ast.operand, events, parents, scales)
    if isinstance(ast, Before):
        for a in _atom_events(ast.first, events, parents, scales):
            for b in _atom_events(ast.then, events, parents, scales):
                ae, bs = _date(a.get("end")), _date(b.get("start"))
                if ae is not None and bs is not None and ae < bs:
                    return True
        return False
    raise TypeError(ast)


def parents_of(ontology) -> dict[str, tuple[str, ...]]:
    return {cid: c.parents for cid, c in ontology.concepts.items()}


# -- vector search ---------------------------------------------------------------

def brute_topk(rows: list[tuple[str, list[float]]], query: list[float], k: int) -> list[tuple[str, float]]:
    """Score every row with a plain Python dot product, sort by (-score, id)."""
    scored = []
    for cid, vec in rows:
        s = 0.0
        for a, b in zip(vec, query):
            s += a * b
        scored.append((cid, s))
    scored.sort(key=lambda t: (-t[1], t[0]))
    return scored[:k]


# -- chunking --------------------------------------------------------------------

def chunk_spans(n_tokens: int, size: int, overlap: int) -> list[tuple[int, int]]:
    """Grow windows one at a time until the document end is covered."""
    spans = []
    start = 0
    while True:
        end = min(start + size, n_tokens)
        spans.append((start, end))
        if end >= n_tokens:
            return spans
        start += size - overlap


# -- metrics ---------------------------------------------------------------------

def scalar_prf(pairs: list[tuple[set, set]]) -> dict[str, float]:
    """Macro and micro P/R/F1 from (pred, gold) set pairs, written out longhand."""
    ps, rs, fs = [], [], []
    TP = FP = FN = 0
    for pred, gold in pairs:
        tp = len([x for x in pred if x in gold])
        fp = len([x for x in pred if x not in gold])
        fn = len([x for x in gold if x not in pred])
        TP, FP, FN = TP + tp, FP + fp, FN + fn
        p = tp / (tp + fp) if tp + fp > 0 else 0.0
        r = tp / (tp + fn) if tp + fn > 0 else 0.0
        f = (2 * p * r) / (p + r) if p + r > 0 else 0.0
        ps.append(p)
        rs.append(r)
        fs.append(f)
    n = len(pairs)
    mp = TP / (TP + FP) if TP + FP > 0 else 0.0
    mr = TP / (TP + FN) if TP + FN > 0 else 0.0
    mf = (2 * mp * mr) / (mp + mr) if mp + mr > 0 else 0.0
    return {
        "macro_p": math.fsum(ps) / n, "macro_r": math.fsum(rs) / n, "macro_f": math.fsum(fs) / n,
        "micro_p": mp, "micro_r": mr, "micro_f": mf,
    }


def scalar_hr(pred: set, gold: set) -> float:
    fp = len([x for x in pred if x not in gold])
    return fp / len(gold)


def terciles_by_sort(doc_counts: dict[str, int]) -> dict[str, str]:
    items = sorted(doc_counts.items(), key=lambda kv: (kv[1], kv[0]))
    n = len(items)
    out = {}
    for i, (pid, _) in enumerate(items):
        if i < n // 3:
            out[pid] = "bottom"
        elif i < 2 * n // 3:
            out[pid] = "middle"
        else:
            out[pid] = "top"
    return out
