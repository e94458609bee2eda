"""Concept ontology: ISA DAG, synonyms, ordinal attribute tables and requires-constraints."""

from __future__ import annotations

import difflib
import json
import re
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path


class OntologyError(ValueError):
    pass


class UnknownConcept(OntologyError, KeyError):
    def __init__(self, name: str, suggestions: list[str] | None = None):
        self.name = name
        self.suggestions = suggestions or []
        msg = f"unknown concept {name!r}"
        if self.suggestions:
            msg += f" (did you mean: {', '.join(self.suggestions)})"
        super().__init__(msg)

    def __str__(self) -> str:
        return self.args[0]


@dataclass(frozen=True)
class Concept:
    id: str
    surface_forms: tuple[str, ...] = ()
    parents: tuple[str, ...] = ()
    attributes_schema: dict = field(default_factory=dict, compare=False, hash=False)
    # organs/structures whose absence is asserted from the event date onward
    implies_absent: tuple[str, ...] = ()

    def to_json(self) -> dict:
        out = {
            "id": self.id,
            "surface_forms": list(self.surface_forms),
            "parents": list(self.parents),
            "attributes_schema": self.attributes_schema,
        }
        if self.implies_absent:
            out["implies_absent"] = list(self.implies_absent)
        return out


@dataclass(frozen=True)
class Constraint:
    id: str
    subject_concept: str
    requires_present: str
    scope: str = "from_event_date"

    def to_json(self) -> dict:
        return {
            "id": self.id,
            "subject_concept": self.subject_concept,
            "requires_present": self.requires_present,
            "scope": self.scope,
        }


def normalize_name(name: str) -> str:
    return " ".join(name.replace("_", " ").lower().split())


class Ontology:
    def __init__(
        self,
        concepts: list[Concept],
        constraints: list[Constraint] = (),
        ordinals: dict[str, list[str]] | None = None,
    ):
        self.concepts: dict[str, Concept] = {}
        for c in concepts:
            if c.id in self.concepts:
                raise OntologyError(f"duplicate concept id {c.id!r}")
            self.concepts[c.id] = c
        self.constraints = list(constraints)
        self.ordinals = {k: list(v) for k, v in (ordinals or {}).items()}
        self.children: dict[str, list[str]] = {cid: [] for cid in self.concepts}
        for c in self.concepts.values():
            for p in c.parents:
                if p not in self.concepts:
                    raise OntologyError(f"concept {c.id!r} has unknown parent {p!r}")
                self.children[p].append(c.id)
            for a in c.implies_absent:
                if a not in self.concepts:
                    raise OntologyError(f"concept {c.id!r} implies absence of unknown {a!r}")
        for k in self.children:
            self.children[k].sort()
        for con in self.constraints:
            for ref in (con.subject_concept, con.requires_present):
                if ref not in self.concepts:
                    raise OntologyError(f"constraint {con.id!r} references unknown concept {ref!r}")
            if con.scope != "from_event_date":
                raise OntologyError(f"constraint {con.id!r}: unsupported scope {con.scope!r}")
        self._check_acyclic()
        self._names: dict[str, str] = {}
        for c in self.concepts.values():
            for form in (c.id, *c.surface_forms):
                key = normalize_name(form)
                other = self._names.setdefault(key, c.id)
                if other != c.id:
                    raise OntologyError(f"surface form {form!r} maps to both {other!r} and {c.id!r}")
        self._closure: dict[str, frozenset[str]] = {}
        self._ancestors: dict[str, frozenset[str]] = {}

    # -- structure ---------------------------------------------------------

    def _check_acyclic(self) -> None:
        WHITE, GREY, BLACK = 0, 1, 2
        color = dict.fromkeys(self.concepts, WHITE)
        for root in sorted(self.concepts):
            if color[root] != WHITE:
                continue
            stack = [(root, iter(self.children[root]))]
            color[root] = GREY
            while stack:
                node, it = stack[-1]
                nxt = next(it, None)
                if nxt is None:
                    color[node] = BLACK
                    stack.pop()
                elif color[nxt] == GREY:
                    raise OntologyError(f"ISA cycle through {nxt!r}")
                elif color[nxt] == WHITE:
                    color[nxt] = GREY
                    stack.append((nxt, iter(self.children[nxt])))

    def __contains__(self, concept_id: object) -> bool:
        return concept_id in self.concepts

    def __len__(self) -> int:
        return len(self.concepts)

    def resolve(self, name: str) -> str:
        """Map a concept id or any surface form (case-insensitive) to its canonical id."""
        cid = self._names.get(normalize_name(name))
        if cid is None:
            raise UnknownConcept(name, self.suggest(name))
        return cid

    def suggest(self, name: str, n: int = 3) -> list[str]:
        return difflib.get_close_matches(normalize_name(name), list(self._names), n=n, cutoff=0.5)

    def closure(self, concept: str) -> frozenset[str]:
        """The concept and all of its ISA-descendants."""
        cid = self.resolve(concept) if concept not in self.concepts else concept
        hit = self._closure.get(cid)
        if hit is None:
            seen = {cid}
            stack = [cid]
            while stack:
                for ch in self.children[stack.pop()]:
                    if ch not in seen:
                        seen.add(ch)
                        stack.append(ch)
            hit = self._closure[cid] = frozenset(seen)
        return hit

    def ancestors(self, concept: str) -> frozenset[str]:
        """The concept and every concept it ISA (reflexive)."""
        hit = self._ancestors.get(concept)
        if hit is None:
            if concept not in self.concepts:
                raise UnknownConcept(concept, self.suggest(concept))
            seen = {concept}
            stack = [concept]
            while stack:
                for p in self.concepts[stack.pop()].parents:
                    if p not in seen:
                        seen.add(p)
                        stack.append(p)
            hit = self._ancestors[concept] = frozenset(seen)
        return hit

    def depth(self, concept: str) -> int:
        """Length of the longest ISA path from a root down to ``concept``."""
        parents = self.concepts[concept].parents
        return 0 if not parents else 1 + max(self.depth(p) for p in parents)

    def max_depth(self) -> int:
        return max((self.depth(c) for c in self.concepts), default=0)

    def constraints_on(self, subject: str) -> list[Constraint]:
        return [c for c in self.constraints if c.subject_concept == subject]

    # -- attributes --------------------------------------------------------

    def ordinal_scale(self, attribute: str) -> list[str] | None:
        return self.ordinals.get(attribute)

    def compare_values(self, attribute: str, left: str, right: str) -> int | None:
        """Three-way compare on the attribute's ordinal scale; None when not comparable."""
        scale = self.ordinals.get(attribute)
        if scale is None:
            return None
        try:
            a, b = scale.index(str(left).upper()), scale.index(str(right).upper())
        except ValueError:
            return None
        return (a > b) - (a < b)

    # -- text matching -----------------------------------------------------

    @cached_property
    def surface_index(self) -> tuple[re.Pattern, dict[str, str]]:
        """Regex over every surface form (longest first) and its lowercase → id map."""
        forms: dict[str, str] = {}
        for c in self.concepts.values():
            for f in c.surface_forms:
                forms.setdefault(" ".join(f.lower().split()), c.id)
        alts = sorted(forms, key=lambda f: (-len(f), f))
        body = "|".join(r"\s+".join(re.escape(p) for p in f.split()) for f in alts)
        pattern = re.compile(rf"(?<![\w+-])(?:{body})(?![\w+])", re.IGNORECASE)
        return pattern, forms

    # -- serialization -----------------------------------------------------

    def to_json(self) -> dict:
        return {
            "concepts": [self.concepts[k].to_json() for k in sorted(self.concepts)],
            "constraints": [c.to_json() for c in self.constraints],
            "ordinals": self.ordinals,
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=1, sort_keys=True, ensure_ascii=False) + "\n"

    @classmethod
    def from_json(cls, obj: dict) -> "Ontology":
        try:
            concepts = [
                Concept(
                    id=c["id"],
                    surface_forms=tuple(c.get("surface_forms", ())),
                    parents=tuple(c.get("parents", ())),
                    attributes_schema=dict(c.get("attributes_schema", {})),
                    implies_absent=tuple(c.get("implies_absent", ())),
                )
                for c in obj["concepts"]
            ]
            constraints = [
                Constraint(
                    id=c["id"],
                    subject_concept=c["subject_concept"],
                    requires_present=c["requires_present"],
                    scope=c.get("scope", "from_event_date"),
                )
                for c in obj.get("constraints", [])
            ]
        except (KeyError, TypeError) as exc:
            raise OntologyError(f"malformed ontology: {exc}") from exc
        return cls(concepts, constraints, obj.get("ordinals"))

    @classmethod
    def load(cls, path: str | Path) -> "Ontology":
        with open(path, encoding="utf-8") as fh:
            return cls.from_json(json.load(fh))
