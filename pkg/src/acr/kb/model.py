"""Facts, consolidated events and patient models."""

from __future__ import annotations

import datetime as dt
from dataclasses import dataclass, field
from typing import Mapping

ASSERTED = "asserted"
NEGATED = "negated"
ACTIVE = "active"
RETRACTED = "retracted"

# (doc_id, char_start, char_end)
Provenance = tuple[str, int, int]


def freeze_attrs(attrs: Mapping[str, str] | None) -> tuple[tuple[str, str], ...]:
    return tuple(sorted((str(k), str(v)) for k, v in (attrs or {}).items()))


def attrs_compatible(a: Mapping[str, str], b: Mapping[str, str]) -> bool:
    return all(b[k] == v for k, v in a.items() if k in b)


def _date(value) -> dt.date | None:
    if value is None or isinstance(value, dt.date):
        return value
    return dt.date.fromisoformat(value)


def _iso(value: dt.date | None) -> str | None:
    return value.isoformat() if value is not None else None


@dataclass(frozen=True)
class Fact:
    concept: str
    polarity: str
    attributes: tuple[tuple[str, str], ...]
    event_date: dt.date | None
    confidence: float
    provenance: Provenance
    doc_date: dt.date | None = None

    def __post_init__(self):
        if not 0.0 < self.confidence <= 1.0:
            raise ValueError(f"confidence must be in (0, 1], got {self.confidence}")
        if self.polarity not in (ASSERTED, NEGATED):
            raise ValueError(f"bad polarity {self.polarity!r}")

    @property
    def attrs(self) -> dict[str, str]:
        return dict(self.attributes)

    def sort_key(self):
        far = dt.date.max
        return (self.event_date or far, self.doc_date or far, self.provenance,
                self.concept, self.polarity)


@dataclass
class ConsolidatedEvent:
    event_id: str
    concept: str
    polarity: str
    attributes: dict[str, str]
    start: dt.date | None
    end: dt.date | None
    confidence: float
    support: list[Provenance] = field(default_factory=list)
    status: str = ACTIVE
    retraction_reason: str | None = None
    last_seen: dt.date | None = None

    @property
    def active(self) -> bool:
        return self.status == ACTIVE

    def key(self) -> tuple:
        """Identity used when comparing event sets (ignores support and confidence)."""
        return (self.concept, self.polarity, freeze_attrs(self.attributes), self.start, self.end)

    def to_json(self, with_status: bool = True) -> dict:
        out = {
            "event_id": self.event_id,
            "concept": self.concept,
            "polarity": self.polarity,
            "attributes": dict(sorted(self.attributes.items())),
            "start": _iso(self.start),
            "end": _iso(self.end),
            "confidence": self.confidence,
            "support": [list(s) for s in self.support],
        }
        if with_status:
            out["status"] = self.status
            out["retraction_reason"] = self.retraction_reason
            out["last_seen"] = _iso(self.last_seen)
        return out

    @classmethod
    def from_json(cls, obj: dict, default_id: str = "e0") -> "ConsolidatedEvent":
        start, end = _date(obj.get("start")), _date(obj.get("end"))
        support = [tuple(s) for s in obj.get("support") or []]
        return cls(
            event_id=obj.get("event_id", default_id),
            concept=obj["concept"],
            polarity=obj.get("polarity", ASSERTED),
            attributes={str(k): str(v) for k, v in (obj.get("attributes") or {}).items()},
            start=start,
            end=end,
            confidence=float(obj.get("confidence", 1.0)),
            support=support,
            status=obj.get("status", ACTIVE),
            retraction_reason=obj.get("retraction_reason"),
            last_seen=_date(obj.get("last_seen")) or end or start,
        )


@dataclass(frozen=True)
class Conflict:
    conflict_id: str
    kind: str  # "polarity" | "constraint"
    constraint_id: str | None
    winner: str
    loser: str
    decided_by: str

    def to_json(self) -> dict:
        return {
            "conflict_id": self.conflict_id,
            "kind": self.kind,
            "constraint_id": self.constraint_id,
            "events": [self.winner, self.loser],
            "resolution": f"retracted {self.loser}; kept {self.winner} (decided by {self.decided_by})",
            "winner": self.winner,
            "loser": self.loser,
            "decided_by": self.decided_by,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "Conflict":
        return cls(obj["conflict_id"], obj["kind"], obj.get("constraint_id"),
                   obj["winner"], obj["loser"], obj["decided_by"])


@dataclass
class PatientModel:
    patient_id: str
    events: list[ConsolidatedEvent] = field(default_factory=list)
    conflicts: list[Conflict] = field(default_factory=list)

    def active_events(self) -> list[ConsolidatedEvent]:
        return [e for e in self.events if e.active]

    def event(self, event_id: str) -> ConsolidatedEvent:
        for e in self.events:
            if e.event_id == event_id:
                return e
        raise KeyError(event_id)

    def active_keys(self) -> set[tuple]:
        return {e.key() for e in self.events if e.active}

    def to_json(self) -> dict:
        return {
            "patient_id": self.patient_id,
            "events": [e.to_json() for e in self.events],
            "conflicts": [c.to_json() for c in self.conflicts],
        }

    @classmethod
    def from_json(cls, obj: dict) -> "PatientModel":
        events = [ConsolidatedEvent.from_json(e, f"e{i:03d}") for i, e in enumerate(obj.get("events", []))]
        return cls(obj["patient_id"], events, [Conflict.from_json(c) for c in obj.get("conflicts", [])])
