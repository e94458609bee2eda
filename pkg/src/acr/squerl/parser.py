"""Recursive-descent parser for the query language (grammar in docs/squerl.md)."""

from __future__ import annotations

import re
from dataclasses import dataclass

from acr.ontology import Ontology, UnknownConcept
from acr.squerl.ast import COMPARATORS, And, Atom, Before, Except, Filter, Node, Not, Or

KEYWORDS = {"AND", "OR", "EXCEPT", "NOT", "BEFORE", "NEG"}


class SquerlError(ValueError):
    pass


class SquerlSyntaxError(SquerlError):
    def __init__(self, offset: int, expected: list[str], found: str):
        self.offset, self.expected, self.found = offset, expected, found
        super().__init__(f"syntax error at offset {offset}: expected {' or '.join(expected)}, found {found}")


class SquerlNameError(SquerlError):
    def __init__(self, offset: int, name: str, suggestions: list[str]):
        self.offset, self.name, self.suggestions = offset, name, suggestions
        msg = f"unknown concept {name!r} at offset {offset}"
        if suggestions:
            msg += f"; nearest: {', '.join(suggestions)}"
        super().__init__(msg)


@dataclass(frozen=True)
class Token:
    kind: str  # KW, WORD, STRING, OP, PUNCT, EOF
    value: str
    offset: int

    def describe(self) -> str:
        return "end of input" if self.kind == "EOF" else repr(self.value)


_LEX = re.compile(
    r"""(?P<ws>\s+)
      | (?P<string>"(?:[^"\\]|\\.)*")
      | (?P<op>!=|>=|<=|=)
      | (?P<punct>[()\[\],])
      | (?P<word>[A-Za-z0-9_][A-Za-z0-9_+\-./]*)""",
    re.VERBOSE,
)


def tokenize(text: str) -> list[Token]:
    tokens = []
    pos = 0
    byte = lambda i: len(text[:i].encode("utf-8"))  # noqa: E731
    while pos < len(text):
        m = _LEX.match(text, pos)
        if m is None:
            raise SquerlSyntaxError(byte(pos), ["a token"], repr(text[pos]))
        kind = m.lastgroup
        val = m.group()
        if kind == "string":
            tokens.append(Token("STRING", re.sub(r"\\(.)", r"\1", val[1:-1]), byte(pos)))
        elif kind == "op":
            tokens.append(Token("OP", val, byte(pos)))
        elif kind == "punct":
            tokens.append(Token("PUNCT", val, byte(pos)))
        elif kind == "word":
            is_kw = val.upper() in KEYWORDS
            tokens.append(Token("KW" if is_kw else "WORD", val.upper() if is_kw else val, byte(pos)))
        pos = m.end()
    tokens.append(Token("EOF", "", len(text.encode("utf-8"))))
    return tokens


class Parser:
    def __init__(self, text: str, ontology: Ontology | None = None):
        self.tokens = tokenize(text)
        self.i = 0
        self.ontology = ontology

    @property
    def tok(self) -> Token:
        return self.tokens[self.i]

    def _fail(self, *expected: str):
        raise SquerlSyntaxError(self.tok.offset, list(expected), self.tok.describe())

    def _is(self, kind: str, value: str | None = None) -> bool:
        return self.tok.kind == kind and (value is None or self.tok.value == value)

    def _eat(self, kind: str, value: str | None = None) -> Token:
        if not self._is(kind, value):
            self._fail(repr(value) if value else kind.lower())
        t = self.tok
        self.i += 1
        return t

    def parse(self) -> Node:
        node = self.expr()
        if not self._is("EOF"):
            self._fail("AND", "OR", "EXCEPT", "end of input")
        return node

    def expr(self) -> Node:
        node = self.term()
        while self._is("KW", "OR"):
            self.i += 1
            node = Or(node, self.term())
        return node

    def term(self) -> Node:
        node = self.factor()
        while self._is("KW", "AND") or self._is("KW", "EXCEPT"):
            op = self.tok.value
            self.i += 1
            right = self.factor()
            node = And(node, right) if op == "AND" else Except(node, right)
        return node

    def factor(self) -> Node:
        if self._is("KW", "NOT"):
            self.i += 1
            return Not(self.factor())
        if self._is("KW", "BEFORE"):
            self.i += 1
            self._eat("PUNCT", "(")
            first = self.atom()
            self._eat("PUNCT", ",")
            then = self.atom()
            self._eat("PUNCT", ")")
            return Before(first, then)
        if self._is("PUNCT", "("):
            self.i += 1
            node = self.expr()
            self._eat("PUNCT", ")")
            return node
        if self._is("WORD") or self._is("STRING") or self._is("KW", "NEG"):
            return self.atom()
        self._fail("a concept name", "NOT", "BEFORE", "'('")

    def atom(self) -> Atom:
        polarity = "asserted"
        if self._is("KW", "NEG"):
            self.i += 1
            polarity = "negated"
        concept = self.name()
        filters = []
        if self._is("PUNCT", "["):
            self.i += 1
            filters.append(self.filter())
            while self._is("PUNCT", ","):
                self.i += 1
                filters.append(self.filter())
            self._eat("PUNCT", "]")
        return Atom(concept, polarity, tuple(filters))

    def name(self) -> str:
        start = self.tok
        if self._is("STRING"):
            self.i += 1
            return self._resolve([start.value], start)
        if not self._is("WORD"):
            self._fail("a concept name")
        j = self.i
        while self.tokens[j].kind == "WORD":
            j += 1
        words = [t.value for t in self.tokens[self.i:j]]
        if self.ontology is None:
            self.i = j
            return " ".join(words)
        # longest run of words that names a concept
        for n in range(len(words), 0, -1):
            try:
                cid = self.ontology.resolve(" ".join(words[:n]))
            except UnknownConcept:
                continue
            self.i += n
            return cid
        self._resolve([" ".join(words)], start)

    def _resolve(self, words: list[str], at: Token) -> str:
        name = " ".join(words)
        if self.ontology is None:
            return name
        try:
            return self.ontology.resolve(name)
        except UnknownConcept as exc:
            raise SquerlNameError(at.offset, name, exc.suggestions) from None

    def filter(self) -> Filter:
        attr = self._eat("WORD").value
        if not self._is("OP"):
            self._fail(*(repr(c) for c in COMPARATORS))
        op = self.tok.value
        self.i += 1
        if self._is("WORD") or self._is("STRING"):
            value = self.tok.value
            self.i += 1
        else:
            self._fail("a value")
        return Filter(attr.lower(), op, value)


def parse(text: str, ontology: Ontology | None = None) -> Node:
    """Parse query text; with an ontology, concept names resolve to canonical ids."""
    return Parser(text, ontology).parse()
