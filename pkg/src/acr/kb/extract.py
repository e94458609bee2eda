"""Rule-based document-level fact extraction against the ontology's surface forms."""

from __future__ import annotations

import datetime as dt
import re
from typing import Mapping

from acr.corpus import Document
from acr.kb.model import ASSERTED, NEGATED, Fact, freeze_attrs
from acr.ontology import Ontology

DEFAULT_CONFIDENCE = 0.8
NEGATION_WINDOW = 4
NEGATION_CUES = (("no",), ("denies",), ("without",), ("negative", "for"))

_DATE_TAG = re.compile(r"\s*@date\{(\d{4}-\d{2}-\d{2})\}")
_SENTENCE_END = re.compile(r"[.;!?](?=\s|$)|\n")
_PUNCT = ".,;:!?()[]\"'"


def _negated(prefix: str) -> bool:
    words = [w.strip(_PUNCT).lower() for w in prefix.split()][-NEGATION_WINDOW:]
    for cue in NEGATION_CUES:
        n = len(cue)
        for i in range(len(words) - n + 1):
            if tuple(words[i:i + n]) == cue:
                return True
    return False


class RuleExtractor:
    """Longest-match surface-form scanner with sentence-scoped negation and attribute capture.

    A negation cue must appear among the four tokens preceding a mention, inside
    the same sentence. ``@date{YYYY-MM-DD}`` right after a mention sets its event
    date. Concepts that imply absence of a structure (e.g. a hysterectomy) also
    emit a negated fact for that structure with the same provenance.
    """

    name = "rules"

    def __init__(self, ontology: Ontology, base_confidence: float = DEFAULT_CONFIDENCE,
                 concept_confidence: Mapping[str, float] | None = None):
        self.ontology = ontology
        self.base_confidence = base_confidence
        self.concept_confidence = dict(concept_confidence or {})
        self._pattern, self._forms = ontology.surface_index
        self._attr_patterns: dict[str, list[tuple[str, re.Pattern]]] = {}
        self._conf: dict[str, float] = {}

    def confidence_for(self, concept: str) -> float:
        hit = self._conf.get(concept)
        if hit is None:
            hit = self.base_confidence
            if self.concept_confidence:
                # nearest configured ancestor wins; ties by id for determinism
                best = None
                for anc in sorted(self.ontology.ancestors(concept)):
                    if anc in self.concept_confidence:
                        d = self.ontology.depth(anc)
                        if best is None or d > best[0]:
                            best = (d, self.concept_confidence[anc])
                if best is not None:
                    hit = best[1]
            self._conf[concept] = hit
        return hit

    def _attributes(self, concept: str) -> list[tuple[str, re.Pattern]]:
        pats = self._attr_patterns.get(concept)
        if pats is None:
            schema = self.ontology.concepts[concept].attributes_schema
            pats = [(name, re.compile(rf"\b{re.escape(name)}\s+([A-Za-z0-9+\-]+)", re.IGNORECASE))
                    for name in sorted(schema)]
            self._attr_patterns[concept] = pats
        return pats

    def extract_text(self, text: str, doc_id: str, doc_date: dt.date | None) -> list[Fact]:
        matches = list(self._pattern.finditer(text))
        boundaries = [m.start() for m in _SENTENCE_END.finditer(text)]
        facts: list[Fact] = []
        b = 0
        for i, m in enumerate(matches):
            while b < len(boundaries) and boundaries[b] < m.start():
                b += 1
            sent_start = boundaries[b - 1] + 1 if b > 0 else 0
            sent_end = boundaries[b] if b < len(boundaries) else len(text)
            concept = self._forms[" ".join(m.group().lower().split())]
            polarity = NEGATED if _negated(text[sent_start:m.start()]) else ASSERTED

            event_date = doc_date
            tail_start = m.end()
            tag = _DATE_TAG.match(text, m.end())
            if tag:
                try:
                    event_date = dt.date.fromisoformat(tag.group(1))
                except ValueError:
                    pass
                tail_start = tag.end()
            tail_end = sent_end
            if i + 1 < len(matches):
                tail_end = min(tail_end, matches[i + 1].start())
            tail = text[tail_start:tail_end]
            attrs = {}
            scales = self.ontology.ordinals
            for name, pat in self._attributes(concept):
                am = pat.search(tail)
                if am:
                    value = am.group(1)
                    if name in scales:
                        value = value.upper()
                        if value not in scales[name]:
                            continue
                    attrs[name] = value

            conf = self.confidence_for(concept)
            prov = (doc_id, m.start(), m.end())
            facts.append(Fact(concept, polarity, freeze_attrs(attrs), event_date, conf, prov, doc_date))
            if polarity == ASSERTED:
                for absent in self.ontology.concepts[concept].implies_absent:
                    facts.append(Fact(absent, NEGATED, (), event_date, conf, prov, doc_date))
        return facts

    def extract(self, doc: Document) -> list[Fact]:
        return self.extract_text(doc.text, doc.doc_id, doc.authored_at)


def extract_facts(doc: Document, ontology: Ontology, base_confidence: float = DEFAULT_CONFIDENCE) -> list[Fact]:
    return RuleExtractor(ontology, base_confidence).extract(doc)
