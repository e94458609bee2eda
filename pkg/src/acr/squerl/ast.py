"""Query AST nodes and a precedence-aware pretty printer."""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Iterator, Union

COMPARATORS = ("=", "!=", ">=", "<=")


@dataclass(frozen=True)
class Filter:
    attribute: str
    op: str
    value: str


@dataclass(frozen=True)
class Atom:
    concept: str
    polarity: str = "asserted"
    filters: tuple[Filter, ...] = ()


@dataclass(frozen=True)
class And:
    left: "Node"
    right: "Node"


@dataclass(frozen=True)
class Or:
    left: "Node"
    right: "Node"


@dataclass(frozen=True)
class Except:
    left: "Node"
    right: "Node"


@dataclass(frozen=True)
class Not:
    operand: "Node"


@dataclass(frozen=True)
class Before:
    first: Atom
    then: Atom

    def __post_init__(self):
        if not isinstance(self.first, Atom) or not isinstance(self.then, Atom):
            raise TypeError("BEFORE operands must be atoms")


Node = Union[Atom, And, Or, Except, Not, Before]


def atoms(node: Node) -> Iterator[Atom]:
    if isinstance(node, Atom):
        yield node
    elif isinstance(node, Before):
        yield node.first
        yield node.then
    elif isinstance(node, Not):
        yield from atoms(node.operand)
    else:
        yield from atoms(node.left)
        yield from atoms(node.right)


def operator_count(node: Node) -> int:
    if isinstance(node, Atom):
        return 1 if node.polarity == "negated" else 0
    if isinstance(node, Before):
        return 1 + operator_count(node.first) + operator_count(node.then)
    if isinstance(node, Not):
        return 1 + operator_count(node.operand)
    return 1 + operator_count(node.left) + operator_count(node.right)


def map_atoms(node: Node, fn) -> Node:
    if isinstance(node, Atom):
        return fn(node)
    if isinstance(node, Before):
        return Before(fn(node.first), fn(node.then))
    if isinstance(node, Not):
        return Not(map_atoms(node.operand, fn))
    return type(node)(map_atoms(node.left, fn), map_atoms(node.right, fn))


_BARE = re.compile(r"[A-Za-z0-9_][A-Za-z0-9_+\-./]*\Z")
_KEYWORDS = {"AND", "OR", "EXCEPT", "NOT", "BEFORE", "NEG"}


def _name(text: str) -> str:
    if _BARE.match(text) and text.upper() not in _KEYWORDS:
        return text
    return '"' + text.replace("\\", "\\\\").replace('"', '\\"') + '"'


def _atom(a: Atom) -> str:
    if a.polarity == "negated":
        base = f"NEG {_name(a.concept)}"
    else:
        base = _name(a.concept)
    if a.filters:
        base += "[" + ", ".join(f"{f.attribute}{f.op}{_name(f.value)}" for f in a.filters) + "]"
    return base


_PREC = {Or: 1, And: 2, Except: 2}


def to_text(node: Node) -> str:
    """Render canonical query text; ``parse(to_text(x)) == x``."""
    if isinstance(node, Atom):
        return _atom(node)
    if isinstance(node, Before):
        return f"BEFORE({_atom(node.first)}, {_atom(node.then)})"
    if isinstance(node, Not):
        inner = node.operand
        s = to_text(inner)
        return f"NOT {s}" if isinstance(inner, (Atom, Before, Not)) else f"NOT ({s})"
    prec = _PREC[type(node)]
    kw = {Or: "OR", And: "AND", Except: "EXCEPT"}[type(node)]
    left, right = to_text(node.left), to_text(node.right)
    if type(node.left) in _PREC and _PREC[type(node.left)] < prec:
        left = f"({left})"
    if type(node.right) in _PREC and _PREC[type(node.right)] <= prec:
        right = f"({right})"
    return f"{left} {kw} {right}"
