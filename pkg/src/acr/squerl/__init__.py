from acr.squerl.ast import And, Atom, Before, Except, Filter, Node, Not, Or, to_text
from acr.squerl.bank import QueryRecord, load_bank, save_bank
from acr.squerl.engine import canonicalize, execute
from acr.squerl.parser import SquerlError, SquerlNameError, SquerlSyntaxError, parse
from acr.squerl.translate import UntranslatableQuery, render_nl, translate_nl


def closure(concept, ontology):
    """The concept plus all ISA-descendants, after resolving synonyms."""
    return ontology.closure(ontology.resolve(concept))


__all__ = [
    "And", "Atom", "Before", "Except", "Filter", "Node", "Not", "Or",
    "QueryRecord", "SquerlError", "SquerlNameError", "SquerlSyntaxError", "UntranslatableQuery",
    "canonicalize", "closure", "execute", "load_bank", "parse", "render_nl", "save_bank",
    "to_text", "translate_nl",
]
