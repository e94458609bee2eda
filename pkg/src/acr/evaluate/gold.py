from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

from acr.cohort import Cohort
from acr.io import iter_jsonl, write_jsonl


class GoldError(ValueError):
    pass


@dataclass
class GoldMatrix:
    gold: dict[str, Cohort]
    population: frozenset[str]

    def __post_init__(self):
        for qid, cohort in self.gold.items():
            stray = cohort.patient_ids - self.population
            if stray:
                raise GoldError(f"gold for {qid} contains patients outside the population: {sorted(stray)[:3]}")

    def check_covers(self, query_ids: Iterable[str]) -> None:
        missing = [q for q in query_ids if q not in self.gold]
        if missing:
            raise GoldError(f"gold matrix lacks {len(missing)} bank queries, e.g. {missing[0]}")

    def cell(self, query_id: str, patient_id: str) -> bool:
        return patient_id in self.gold[query_id]

    def save(self, path: str | Path, meta: dict | None = None) -> None:
        records = []
        if meta is not None:
            records.append({"_meta": {**meta, "population": sorted(self.population)}})
        else:
            records.append({"_meta": {"population": sorted(self.population)}})
        records.extend({"query_id": q, "patient_ids": sorted(c.patient_ids)} for q, c in self.gold.items())
        write_jsonl(path, records)

    @classmethod
    def load(cls, path: str | Path, population: Iterable[str] | None = None) -> "GoldMatrix":
        gold, pop = {}, None
        for _, obj in iter_jsonl(path):
            if "_meta" in obj:
                pop = obj["_meta"].get("population")
                continue
            gold[str(obj["query_id"])] = Cohort(frozenset(obj["patient_ids"]))
        if population is not None:
            pop = population
        if pop is None:
            raise GoldError(f"{path}: no population recorded; pass one explicitly")
        return cls(gold, frozenset(pop))


def read_meta(path: str | Path) -> dict:
    for _, obj in iter_jsonl(path):
        return obj.get("_meta", {})
    return {}


def save_cohorts(path: str | Path, cohorts: dict[str, Cohort], meta: dict | None = None) -> None:
    """Cohort interchange file: one ``{query_id, patient_ids, ranking?}`` record per line."""
    records = [{"_meta": meta}] if meta else []
    records.extend(c.to_json(q) for q, c in cohorts.items())
    write_jsonl(path, records)


def load_cohorts(path: str | Path) -> tuple[dict[str, Cohort], dict]:
    cohorts, meta = {}, {}
    for lineno, obj in iter_jsonl(path):
        if "_meta" in obj:
            meta = obj["_meta"]
            continue
        try:
            cohorts[str(obj["query_id"])] = Cohort.from_json(obj)
        except (KeyError, ValueError) as exc:
            raise GoldError(f"{path}: line {lineno}: bad cohort record ({exc})") from exc
    return cohorts, meta
