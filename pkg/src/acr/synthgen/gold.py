"""Gold matrix by deterministic reasoning over the clean abstractions (never the rendered text)."""

from __future__ import annotations

from typing import Iterable, Sequence

from acr.evaluate.gold import GoldMatrix
from acr.kb.store import KnowledgeBase, KnowledgeBaseError, build_kb_from_abstractions
from acr.ontology import Ontology
from acr.squerl.bank import QueryRecord
from acr.squerl.engine import execute
from acr.squerl.parser import SquerlError


class GoldGenerationError(ValueError):
    pass


def gen_gold(abstractions: Iterable[dict], bank: Sequence[QueryRecord], ontology: Ontology,
             kb: KnowledgeBase | None = None) -> GoldMatrix:
    if kb is None:
        try:
            kb = build_kb_from_abstractions(abstractions, ontology)
        except KnowledgeBaseError as exc:
            raise GoldGenerationError(str(exc)) from exc
    gold = {}
    for rec in bank:
        try:
            ast = rec.ast(ontology)
        except SquerlError as exc:
            raise GoldGenerationError(f"query {rec.query_id}: {exc}") from exc
        gold[rec.query_id] = execute(ast, kb)
    # gold is an unranked set
    gold = {q: type(c)(c.patient_ids) for q, c in gold.items()}
    return GoldMatrix(gold, kb.universe())
