"""Query bank records and their JSONL interchange format."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

from acr.io import iter_jsonl, write_jsonl
from acr.ontology import Ontology
from acr.squerl.ast import Node
from acr.squerl.parser import SquerlError, parse
from acr.squerl.translate import UntranslatableQuery, translate_nl

EXPERT_CLASSES = ("Base", "Low", "Medium", "Hard")
RELATION_KINDS = ("paraphrase_of", "child_of", "intersection_of")


class QueryBankError(ValueError):
    pass


@dataclass
class QueryRecord:
    query_id: str
    nl_text: str
    squerl_text: str
    expert_class: str = "Base"
    relations: list[tuple[str, str]] = field(default_factory=list)
    zero_result: bool = False

    def ast(self, ontology: Ontology | None = None) -> Node:
        return parse(self.squerl_text, ontology)

    def related(self, kind: str) -> list[str]:
        return [other for k, other in self.relations if k == kind]

    def to_json(self) -> dict:
        return {
            "query_id": self.query_id,
            "nl_text": self.nl_text,
            "squerl_text": self.squerl_text,
            "expert_class": self.expert_class,
            "relations": [{"kind": k, "query_id": q} for k, q in self.relations],
            "zero_result": self.zero_result,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "QueryRecord":
        rels = []
        for r in obj.get("relations", []):
            if isinstance(r, dict):
                rels.append((r["kind"], str(r["query_id"])))
            else:
                rels.append((r[0], str(r[1])))
        return cls(
            query_id=str(obj["query_id"]),
            nl_text=obj.get("nl_text", ""),
            squerl_text=obj.get("squerl_text", ""),
            expert_class=obj.get("expert_class", "Base"),
            relations=rels,
            zero_result=bool(obj.get("zero_result", False)),
        )


def validate_bank(records: list[QueryRecord], ontology: Ontology | None = None) -> None:
    ids = [r.query_id for r in records]
    if len(set(ids)) != len(ids):
        raise QueryBankError("duplicate query_id in bank")
    known = set(ids)
    for r in records:
        if r.expert_class not in EXPERT_CLASSES:
            raise QueryBankError(f"query {r.query_id}: unknown expert class {r.expert_class!r}")
        for kind, other in r.relations:
            if kind not in RELATION_KINDS:
                raise QueryBankError(f"query {r.query_id}: unknown relation kind {kind!r}")
            if other not in known:
                raise QueryBankError(f"query {r.query_id}: relation references unknown query {other!r}")
        try:
            r.ast(ontology)
        except SquerlError as exc:
            raise QueryBankError(f"query {r.query_id}: {exc}") from exc


def load_bank(path: str | Path, ontology: Ontology | None = None) -> list[QueryRecord]:
    records = [QueryRecord.from_json(obj) for _, obj in iter_jsonl(path) if "_meta" not in obj]
    validate_bank(records, ontology)
    return records


def save_bank(path: str | Path, records: list[QueryRecord], meta: dict | None = None) -> None:
    head = [{"_meta": meta}] if meta else []
    write_jsonl(path, head + [r.to_json() for r in records])


def import_nl_bank(path: str | Path, ontology: Ontology) -> tuple[list[QueryRecord], list[str]]:
    """Read an NL-only bank (query_id + text); returns translatable records and the ids needing manual queries."""
    records, pending = [], []
    for _, obj in iter_jsonl(path):
        if "_meta" in obj:
            continue
        qid = str(obj["query_id"])
        text = obj.get("nl_text") or obj.get("text") or obj.get("query") or ""
        try:
            records.append(QueryRecord(qid, text, translate_nl(text, ontology)))
        except UntranslatableQuery:
            pending.append(qid)
    return records, pending
