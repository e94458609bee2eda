from __future__ import annotations

from dataclasses import dataclass, field


@dataclass(frozen=True)
class Cohort:
    """A set of patient ids, optionally with a total ranking and per-patient scores."""

    patient_ids: frozenset[str]
    ranking: tuple[str, ...] | None = None
    scores: dict[str, float] | None = field(default=None, compare=False, hash=False)

    def __post_init__(self):
        object.__setattr__(self, "patient_ids", frozenset(self.patient_ids))
        if self.ranking is not None:
            ranking = tuple(self.ranking)
            if len(set(ranking)) != len(ranking) or set(ranking) != self.patient_ids:
                raise ValueError("ranking must cover exactly the cohort members, once each")
            object.__setattr__(self, "ranking", ranking)

    @classmethod
    def ranked(cls, scores: dict[str, float]) -> "Cohort":
        """Order by descending score, ties by patient_id."""
        order = tuple(sorted(scores, key=lambda p: (-scores[p], p)))
        return cls(frozenset(scores), order, dict(scores))

    def __len__(self) -> int:
        return len(self.patient_ids)

    def __iter__(self):
        return iter(self.ranking if self.ranking is not None else sorted(self.patient_ids))

    def __contains__(self, pid: object) -> bool:
        return pid in self.patient_ids

    def to_json(self, query_id: str | None = None) -> dict:
        out = {"patient_ids": sorted(self.patient_ids)}
        if query_id is not None:
            out["query_id"] = query_id
        if self.ranking is not None:
            out["ranking"] = list(self.ranking)
        return out

    @classmethod
    def from_json(cls, obj: dict) -> "Cohort":
        ranking = obj.get("ranking")
        return cls(frozenset(obj["patient_ids"]), tuple(ranking) if ranking is not None else None)


EMPTY = Cohort(frozenset())
