"""Longitudinal consolidation of a patient's facts into a conflict-free patient model."""

from __future__ import annotations

import datetime as dt
from dataclasses import dataclass
from typing import Callable, Sequence

from acr.kb.model import (
    ASSERTED,
    NEGATED,
    RETRACTED,
    Conflict,
    ConsolidatedEvent,
    Fact,
    PatientModel,
    attrs_compatible,
)
from acr.ontology import Ontology

DEFAULT_MERGE_WINDOW_DAYS = 365


class ConsolidationError(ValueError):
    pass


def noisy_or(a: float, b: float) -> float:
    return 1.0 - (1.0 - a) * (1.0 - b)


# -- resolution policies -----------------------------------------------------
# A policy orders the strength criteria; the first criterion that differs decides.

_CRITERIA: dict[str, Callable[[ConsolidatedEvent], object]] = {
    "support": lambda e: len(e.support),
    "confidence": lambda e: e.confidence,
    "recency": lambda e: e.last_seen or dt.date.min,
}

POLICIES: dict[str, tuple[str, ...]] = {
    "support": ("support", "confidence", "recency"),
    "confidence": ("confidence", "support", "recency"),
    "recency": ("recency", "support", "confidence"),
}
DEFAULT_POLICY = "support"


@dataclass(frozen=True)
class ResolutionPolicy:
    order: tuple[str, ...]
    name: str = "custom"

    @classmethod
    def named(cls, name: str) -> "ResolutionPolicy":
        try:
            return cls(POLICIES[name], name)
        except KeyError:
            raise ValueError(f"unknown resolution policy {name!r}; choose from {sorted(POLICIES)}") from None

    def strength(self, e: ConsolidatedEvent) -> tuple:
        return tuple(_CRITERIA[c](e) for c in self.order)

    def deciding_criterion(self, winner: ConsolidatedEvent, loser: ConsolidatedEvent) -> str:
        for c in self.order:
            if _CRITERIA[c](winner) != _CRITERIA[c](loser):
                return c
        return "order"


# -- conflict detection ------------------------------------------------------

def polarity_conflict(a: ConsolidatedEvent, b: ConsolidatedEvent) -> bool:
    return (a.concept == b.concept and a.polarity != b.polarity
            and attrs_compatible(a.attributes, b.attributes))


def constraint_conflict(a: ConsolidatedEvent, b: ConsolidatedEvent, ontology: Ontology) -> str | None:
    """Id of a requires-constraint violated between ``a`` and ``b`` (either direction), else None."""
    for subj, absent in ((a, b), (b, a)):
        if subj.polarity != ASSERTED or absent.polarity != NEGATED:
            continue
        if absent.start is None or subj.end is None:
            continue
        subj_anc = ontology.ancestors(subj.concept)
        abs_anc = ontology.ancestors(absent.concept)
        for con in ontology.constraints:
            if con.subject_concept in subj_anc and con.requires_present in abs_anc:
                # absence holds from its date onward; the subject must not extend into it
                if absent.start <= subj.end:
                    return con.id
    return None


def find_conflict(a: ConsolidatedEvent, b: ConsolidatedEvent, ontology: Ontology) -> tuple[str, str | None] | None:
    if polarity_conflict(a, b):
        return ("polarity", None)
    cid = constraint_conflict(a, b, ontology)
    if cid is not None:
        return ("constraint", cid)
    return None


def resolve(model: PatientModel, ontology: Ontology, policy: ResolutionPolicy) -> None:
    """Greedy resolution: accept events strongest-first, retracting any that clash with an accepted one."""
    creation = {e.event_id: i for i, e in enumerate(model.events)}
    order = sorted(model.events, key=lambda e: (tuple(-_neg(v) for v in policy.strength(e)), creation[e.event_id]))
    accepted: list[ConsolidatedEvent] = []
    for ev in order:
        clash = None
        for winner in accepted:
            hit = find_conflict(winner, ev, ontology)
            if hit is not None:
                clash = (winner, hit)
                break
        if clash is None:
            accepted.append(ev)
            continue
        winner, (kind, cid) = clash
        conflict = Conflict(
            conflict_id=f"c{len(model.conflicts):03d}",
            kind=kind,
            constraint_id=cid,
            winner=winner.event_id,
            loser=ev.event_id,
            decided_by=policy.deciding_criterion(winner, ev),
        )
        model.conflicts.append(conflict)
        ev.status = RETRACTED
        ev.retraction_reason = conflict.conflict_id


def _neg(v):
    # dates are not negatable; map to ordinal so "larger is stronger" sorts first
    return v.toordinal() if isinstance(v, dt.date) else v


# -- merging -----------------------------------------------------------------

def _mergeable(ev: ConsolidatedEvent, f: Fact, window: int) -> bool:
    if ev.concept != f.concept or ev.polarity != f.polarity:
        return False
    if not attrs_compatible(ev.attributes, f.attrs):
        return False
    if f.event_date is None:
        return True
    if ev.end is None:
        return False
    return abs((f.event_date - ev.end).days) <= window


def consolidate(
    facts: Sequence[Fact],
    ontology: Ontology,
    patient_id: str = "",
    merge_window_days: int = DEFAULT_MERGE_WINDOW_DAYS,
    policy: ResolutionPolicy | str = DEFAULT_POLICY,
) -> PatientModel:
    """Fold time-ordered facts into events, then resolve polarity and constraint conflicts.

    Merging happens in input order: a fact joins the most recently extended
    compatible event (same concept, polarity, non-clashing attributes, within
    the merge window), boosting its confidence by noisy-OR. Conflicts are
    resolved once the journey is complete so that late corroboration counts.
    """
    if isinstance(policy, str):
        policy = ResolutionPolicy.named(policy)
    prev = None
    for f in facts:
        k = f.sort_key()
        if prev is not None and k < prev:
            raise ConsolidationError(f"facts are not time-ordered at {f.provenance}")
        prev = k
        if f.concept not in ontology:
            raise ConsolidationError(f"fact concept {f.concept!r} not in ontology")

    model = PatientModel(patient_id)
    by_concept: dict[tuple[str, str], list[ConsolidatedEvent]] = {}
    for f in facts:
        seen = f.event_date or f.doc_date
        bucket = by_concept.setdefault((f.concept, f.polarity), [])
        target = None
        for ev in reversed(bucket):
            if _mergeable(ev, f, merge_window_days):
                target = ev
                break
        if target is None:
            target = ConsolidatedEvent(
                event_id=f"e{len(model.events):03d}",
                concept=f.concept,
                polarity=f.polarity,
                attributes=f.attrs,
                start=f.event_date,
                end=f.event_date,
                confidence=f.confidence,
                support=[f.provenance],
                last_seen=seen,
            )
            model.events.append(target)
            bucket.append(target)
            continue
        target.attributes.update(f.attrs)
        if f.event_date is not None:
            target.start = f.event_date if target.start is None else min(target.start, f.event_date)
            target.end = f.event_date if target.end is None else max(target.end, f.event_date)
        target.confidence = noisy_or(target.confidence, f.confidence)
        target.support.append(f.provenance)
        if seen is not None and (target.last_seen is None or seen > target.last_seen):
            target.last_seen = seen
        # keep the most recently touched event last so the next lookup prefers it
        bucket.remove(target)
        bucket.append(target)

    resolve(model, ontology, policy)
    return model


def check_model(model: PatientModel, ontology: Ontology) -> list[str]:
    """Re-scan active events for residual conflicts; returns human-readable problems."""
    problems = []
    active = model.active_events()
    for i, a in enumerate(active):
        if not a.support:
            problems.append(f"{a.event_id}: empty support")
        for b in active[i + 1:]:
            hit = find_conflict(a, b, ontology)
            if hit is not None:
                problems.append(f"{a.event_id}/{b.event_id}: active {hit[0]} conflict {hit[1] or ''}".rstrip())
    for e in model.events:
        if e.status == RETRACTED and not e.retraction_reason:
            problems.append(f"{e.event_id}: retracted without reason")
    return problems
