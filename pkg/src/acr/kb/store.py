"""Event-rooted knowledge base: patient models plus ontology-closed concept postings."""

from __future__ import annotations

import json
from pathlib import Path
from typing import Iterable, Sequence

from acr.corpus import Corpus
from acr.io import atomic_write_text, iter_jsonl
from acr.kb.consolidate import DEFAULT_MERGE_WINDOW_DAYS, DEFAULT_POLICY, check_model, consolidate
from acr.kb.extract import RuleExtractor
from acr.kb.model import ACTIVE, ConsolidatedEvent, PatientModel
from acr.ontology import Ontology

KB_FORMAT = "acr-kb/1"


class KnowledgeBaseError(ValueError):
    pass


class KnowledgeBase:
    def __init__(self, models: dict[str, PatientModel], ontology: Ontology,
                 postings: dict[str, list[tuple[str, str]]]):
        self.models = models
        self.ontology = ontology
        self.postings = postings
        self._events = {
            (pid, e.event_id): e for pid, m in models.items() for e in m.events
        }

    @property
    def patient_ids(self) -> list[str]:
        return list(self.models)

    def universe(self) -> frozenset[str]:
        return frozenset(self.models)

    def event(self, patient_id: str, event_id: str) -> ConsolidatedEvent:
        return self._events[(patient_id, event_id)]

    def posted_events(self, concept: str) -> Iterable[tuple[str, ConsolidatedEvent]]:
        for pid, eid in self.postings.get(concept, ()):
            yield pid, self._events[(pid, eid)]

    def conflicts(self) -> list[dict]:
        out = []
        for pid, m in self.models.items():
            for c in m.conflicts:
                out.append({"patient_id": pid, **c.to_json()})
        return out

    def to_json(self) -> dict:
        return {
            "format": KB_FORMAT,
            "models": [m.to_json() for m in self.models.values()],
        }

    def save(self, path: str | Path, meta: dict | None = None) -> None:
        obj = self.to_json()
        if meta:
            obj["_meta"] = meta
        atomic_write_text(path, json.dumps(obj, sort_keys=True, separators=(",", ":")) + "\n")

    @classmethod
    def load(cls, path: str | Path, ontology: Ontology) -> "KnowledgeBase":
        with open(path, encoding="utf-8") as fh:
            obj = json.load(fh)
        if obj.get("format") != KB_FORMAT:
            raise KnowledgeBaseError(f"{path}: not a {KB_FORMAT} file")
        return build_kb([PatientModel.from_json(m) for m in obj["models"]], ontology)


def build_postings(models: dict[str, PatientModel], ontology: Ontology) -> dict[str, list[tuple[str, str]]]:
    postings: dict[str, list[tuple[str, str]]] = {}
    for pid in sorted(models):
        for ev in models[pid].events:
            if ev.status != ACTIVE:
                continue
            for concept in sorted(ontology.ancestors(ev.concept)):
                postings.setdefault(concept, []).append((pid, ev.event_id))
    return dict(sorted(postings.items()))


def build_kb(models: Sequence[PatientModel], ontology: Ontology) -> KnowledgeBase:
    by_id: dict[str, PatientModel] = {}
    for m in models:
        if m.patient_id in by_id:
            raise KnowledgeBaseError(f"duplicate patient_id {m.patient_id!r}")
        by_id[m.patient_id] = m
    by_id = dict(sorted(by_id.items()))
    return KnowledgeBase(by_id, ontology, build_postings(by_id, ontology))


def model_from_corpus_patient(docs, patient_id: str, ontology: Ontology, extractor: RuleExtractor | None = None,
                              merge_window_days: int = DEFAULT_MERGE_WINDOW_DAYS,
                              policy=DEFAULT_POLICY) -> PatientModel:
    extractor = extractor or RuleExtractor(ontology)
    facts = [f for d in docs for f in extractor.extract(d)]
    facts.sort(key=lambda f: f.sort_key())
    return consolidate(facts, ontology, patient_id, merge_window_days, policy)


def build_kb_from_corpus(corpus: Corpus, ontology: Ontology, extractor: RuleExtractor | None = None,
                         merge_window_days: int = DEFAULT_MERGE_WINDOW_DAYS, policy=DEFAULT_POLICY) -> KnowledgeBase:
    """Knowledge acquisition: extract, consolidate per patient, then index."""
    extractor = extractor or RuleExtractor(ontology)
    models = [
        model_from_corpus_patient(docs, pid, ontology, extractor, merge_window_days, policy)
        for pid, docs in corpus.patients.items()
    ]
    return build_kb(models, ontology)


def model_from_abstraction(patient_id: str, events: list[dict], ontology: Ontology) -> PatientModel:
    """Load a clean ground-truth journey; rejects journeys that violate patient-model invariants."""
    evs = []
    for i, obj in enumerate(events):
        ev = ConsolidatedEvent.from_json({**obj, "status": ACTIVE}, f"e{i:03d}")
        ev.event_id = obj.get("event_id", f"e{i:03d}")
        if ev.concept not in ontology:
            raise KnowledgeBaseError(f"patient {patient_id}: unknown concept {ev.concept!r}")
        if ev.start is not None and ev.end is not None and ev.start > ev.end:
            raise KnowledgeBaseError(f"patient {patient_id}: event {ev.event_id} ends before it starts")
        if not ev.support:
            ev.support = [(f"abstraction:{patient_id}", i, i)]
        evs.append(ev)
    model = PatientModel(patient_id, evs)
    problems = check_model(model, ontology)
    if problems:
        raise KnowledgeBaseError(f"patient {patient_id}: invalid abstraction: {'; '.join(problems)}")
    return model


def build_kb_from_abstractions(abstractions: Iterable[dict], ontology: Ontology) -> KnowledgeBase:
    models = [model_from_abstraction(a["patient_id"], a["events"], ontology) for a in abstractions]
    return build_kb(models, ontology)


def load_abstractions(path: str | Path) -> list[dict]:
    return [obj for _, obj in iter_jsonl(path) if "_meta" not in obj]
