"""Natural-language query templates: rendering (used by the generator) and their exact inverse.

Supported shape::

    [Find me] patients DISJ [but not DISJ]
    DISJ  := CONJ (" or " CONJ)*
    CONJ  := SEQ (" and " SEQ)*
    SEQ   := PHRASE [" and later " PHRASE]
    PHRASE:= PREFIX surface-form [" stage V" [" or higher" | " or lower"]]

Anything else is rejected rather than guessed.
"""

from __future__ import annotations

import re
from typing import Callable

from acr.ontology import Ontology, UnknownConcept
from acr.squerl.ast import And, Atom, Before, Except, Filter, Node, Or, to_text

ROOT_PREFIX = {
    "condition": "with",
    "biomarker": "with",
    "clinical_event": "with",
    "anatomy": "with",
    "therapy": "treated with",
    "procedure": "who underwent",
}
NEGATED_PREFIX = "negative for"
# longest first so "treated with" wins over "with"
PREFIXES = ("diagnosed with", "negative for", "who underwent", "treated with", "receiving", "with")
_STAGE_SUFFIX = {">=": " or higher", "<=": " or lower", "=": ""}


class UntranslatableQuery(ValueError):
    """The text is outside the template families; an LLM translator or hand-written query is needed."""


def prefix_for(concept: str, ontology: Ontology) -> str:
    roots = sorted(a for a in ontology.ancestors(concept) if not ontology.concepts[a].parents)
    for r in roots:
        if r in ROOT_PREFIX:
            return ROOT_PREFIX[r]
    return "with"


def _phrase(atom: Atom, ontology: Ontology, surface: Callable[[str], str]) -> str:
    if atom.polarity == "negated":
        text = f"{NEGATED_PREFIX} {surface(atom.concept)}"
    else:
        text = f"{prefix_for(atom.concept, ontology)} {surface(atom.concept)}"
    for f in atom.filters:
        if f.attribute != "stage" or f.op not in _STAGE_SUFFIX:
            raise UntranslatableQuery(f"no template for filter {f}")
        text += f" stage {f.value}{_STAGE_SUFFIX[f.op]}"
    return text


def _flatten(node: Node, cls) -> list[Node]:
    if isinstance(node, cls):
        return _flatten(node.left, cls) + _flatten(node.right, cls)
    return [node]


def _render_disj(node: Node, ontology, surface) -> str:
    conjs = []
    for c in _flatten(node, Or):
        seqs = []
        for s in _flatten(c, And):
            if isinstance(s, Atom):
                seqs.append(_phrase(s, ontology, surface))
            elif isinstance(s, Before):
                seqs.append(f"{_phrase(s.first, ontology, surface)} and later {_phrase(s.then, ontology, surface)}")
            else:
                raise UntranslatableQuery(f"no template for nested {type(s).__name__}")
        conjs.append(" and ".join(seqs))
    return " or ".join(conjs)


def render_nl(node: Node, ontology: Ontology, surface: Callable[[str], str] | None = None) -> str:
    surface = surface or (lambda cid: (ontology.concepts[cid].surface_forms or (cid.replace("_", " "),))[0])
    if isinstance(node, Except):
        return (f"Find me patients {_render_disj(node.left, ontology, surface)}"
                f" but not {_render_disj(node.right, ontology, surface)}")
    return f"Find me patients {_render_disj(node, ontology, surface)}"


# -- inverse -------------------------------------------------------------------

_STAGE = re.compile(r"\s+stage\s+(\S+?)(\s+or\s+(higher|lower))?$", re.IGNORECASE)


def _parse_phrase(text: str, ontology: Ontology) -> Atom:
    text = text.strip()
    low = text.lower()
    for prefix in PREFIXES:
        if low.startswith(prefix + " "):
            rest = text[len(prefix) + 1:]
            break
    else:
        raise UntranslatableQuery(f"unrecognised phrase {text!r}")
    filters = ()
    m = _STAGE.search(rest)
    if m:
        op = {"higher": ">=", "lower": "<="}.get((m.group(3) or "").lower(), "=")
        filters = (Filter("stage", op, m.group(1).upper()),)
        rest = rest[:m.start()]
    try:
        concept = ontology.resolve(rest)
    except UnknownConcept as exc:
        raise UntranslatableQuery(f"unknown concept phrase {rest!r}") from exc
    polarity = "negated" if prefix == NEGATED_PREFIX else "asserted"
    return Atom(concept, polarity, filters)


def _fold(cls, parts: list[Node]) -> Node:
    node = parts[0]
    for p in parts[1:]:
        node = cls(node, p)
    return node


def _parse_disj(text: str, ontology: Ontology) -> Node:
    # protect "or higher"/"or lower" from the disjunction split
    text = re.sub(r"\bor\s+(higher|lower)\b", r"OR_\1", text, flags=re.IGNORECASE)
    conjs = []
    for c in re.split(r"\s+or\s+", text):
        seqs = []
        for s in re.split(r"\s+and\s+(?!later\b)", c):
            parts = re.split(r"\s+and\s+later\s+", s)
            parts = [re.sub(r"OR_(higher|lower)", r"or \1", p) for p in parts]
            if len(parts) == 1:
                seqs.append(_parse_phrase(parts[0], ontology))
            elif len(parts) == 2:
                seqs.append(Before(_parse_phrase(parts[0], ontology), _parse_phrase(parts[1], ontology)))
            else:
                raise UntranslatableQuery("chained temporal phrases are not supported")
        conjs.append(_fold(And, seqs))
    return _fold(Or, conjs)


def translate_ast(nl_text: str, ontology: Ontology) -> Node:
    text = " ".join(nl_text.strip().rstrip(".?!").split())
    m = re.match(r"(?:find\s+me\s+)?(?:all\s+)?patients\s+(.*)$", text, re.IGNORECASE)
    if not m or not m.group(1):
        raise UntranslatableQuery(f"no template matches {nl_text!r}")
    body = m.group(1)
    parts = re.split(r"\s+but\s+not\s+", body, flags=re.IGNORECASE)
    if len(parts) > 2:
        raise UntranslatableQuery("multiple exclusions are not supported")
    node = _parse_disj(parts[0], ontology)
    if len(parts) == 2:
        node = Except(node, _parse_disj(parts[1], ontology))
    return node


def translate_nl(nl_text: str, ontology: Ontology) -> str:
    """Template inverse: natural-language query to canonical query text."""
    return to_text(translate_ast(nl_text, ontology))
