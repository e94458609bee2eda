"""Set-semantics execution of query ASTs over a knowledge base."""

from __future__ import annotations

from dataclasses import replace

from acr.cohort import Cohort
from acr.kb.model import ConsolidatedEvent
from acr.kb.store import KnowledgeBase
from acr.ontology import Ontology
from acr.squerl.ast import And, Atom, Before, Except, Filter, Node, Not, Or, map_atoms

Scores = dict[str, float]


def filter_holds(f: Filter, ev: ConsolidatedEvent, ontology: Ontology) -> bool:
    """Missing attributes never satisfy a filter, whatever the comparator."""
    actual = ev.attributes.get(f.attribute)
    if actual is None:
        return False
    cmp = ontology.compare_values(f.attribute, actual, f.value)
    if cmp is None:
        if f.op == "=":
            return actual == f.value
        if f.op == "!=":
            return actual != f.value
        return False
    return {"=": cmp == 0, "!=": cmp != 0, ">=": cmp >= 0, "<=": cmp <= 0}[f.op]


def atom_matches(atom: Atom, ev: ConsolidatedEvent, ontology: Ontology) -> bool:
    return (ev.active and ev.polarity == atom.polarity
            and ev.concept in ontology.closure(atom.concept)
            and all(filter_holds(f, ev, ontology) for f in atom.filters))


class Executor:
    def __init__(self, kb: KnowledgeBase):
        self.kb = kb
        self.ontology = kb.ontology
        self._universe = kb.universe()

    def matching_events(self, atom: Atom) -> dict[str, list[ConsolidatedEvent]]:
        out: dict[str, list[ConsolidatedEvent]] = {}
        for pid, ev in self.kb.posted_events(atom.concept):
            if ev.polarity == atom.polarity and all(filter_holds(f, ev, self.ontology) for f in atom.filters):
                out.setdefault(pid, []).append(ev)
        return out

    def eval(self, node: Node) -> Scores:
        if isinstance(node, Atom):
            return {pid: sum(e.confidence for e in evs) for pid, evs in self.matching_events(node).items()}
        if isinstance(node, And):
            left, right = self.eval(node.left), self.eval(node.right)
            return {p: left[p] + right[p] for p in left.keys() & right.keys()}
        if isinstance(node, Or):
            left, right = self.eval(node.left), self.eval(node.right)
            out = dict(left)
            for p, s in right.items():
                out[p] = out.get(p, 0.0) + s
            return out
        if isinstance(node, Except):
            left, right = self.eval(node.left), self.eval(node.right)
            return {p: s for p, s in left.items() if p not in right}
        if isinstance(node, Not):
            inner = self.eval(node.operand)
            return {p: 0.0 for p in self._universe if p not in inner}
        if isinstance(node, Before):
            return self._before(node)
        raise TypeError(f"not a query node: {node!r}")

    def _before(self, node: Before) -> Scores:
        firsts = self.matching_events(node.first)
        thens = self.matching_events(node.then)
        out: Scores = {}
        for pid in firsts.keys() & thens.keys():
            best = None
            for a in firsts[pid]:
                if a.end is None:
                    continue
                for b in thens[pid]:
                    if b.start is not None and a.end < b.start:
                        s = a.confidence + b.confidence
                        best = s if best is None or s > best else best
            if best is not None:
                out[pid] = best
        return out


def canonicalize(ast: Node, ontology: Ontology) -> Node:
    """Replace every atom's concept name with its canonical ontology id."""
    return map_atoms(ast, lambda a: replace(a, concept=ontology.resolve(a.concept)))


def execute(ast: Node, kb: KnowledgeBase) -> Cohort:
    """Evaluate over patient sets; the ranking orders members by summed witness confidence."""
    return Cohort.ranked(Executor(kb).eval(canonicalize(ast, kb.ontology)))
