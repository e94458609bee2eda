import datetime as dt
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from acr.kb.store import build_kb_from_abstractions
from acr.ontology import Concept, Ontology, OntologyError
from acr.squerl import (
    And,
    Atom,
    Before,
    Except,
    Filter,
    Not,
    Or,
    SquerlNameError,
    SquerlSyntaxError,
    UntranslatableQuery,
    closure,
    execute,
    parse,
    render_nl,
    to_text,
    translate_nl,
)
from acr.synthgen import gen_ontology
from fixtures import small_ontology
from oracles import dfs_reachable, eligible, parents_of

ONTO = small_ontology()
BIG = gen_ontology(42)


# -- parsing ---------------------------------------------------------------------

def test_parse_examples():
    assert parse("breast_cancer AND pik3ca_mutation") == And(Atom("breast_cancer"), Atom("pik3ca_mutation"))
    assert parse("(lung_cancer OR breast_cancer) EXCEPT tamoxifen") == \
        Except(Or(Atom("lung_cancer"), Atom("breast_cancer")), Atom("tamoxifen"))


def test_precedence():
    a, b, c = Atom("a"), Atom("b"), Atom("c")
    assert parse("a OR b AND c") == Or(a, And(b, c))
    assert parse("a EXCEPT b AND c") == And(Except(a, b), c)
    assert parse("NOT a AND b") == And(Not(a), b)
    assert parse("a and b") == And(a, b)


def test_atoms_with_filters_and_neg():
    ast = parse("NEG brca1_mutation OR breast_cancer[stage>=III, stage!=IV]")
    assert ast == Or(Atom("brca1_mutation", "negated"),
                     Atom("breast_cancer", filters=(Filter("stage", ">=", "III"), Filter("stage", "!=", "IV"))))
    assert parse("BEFORE(breast_cancer, pregnancy)") == Before(Atom("breast_cancer"), Atom("pregnancy"))


def test_syntax_error_offsets():
    with pytest.raises(SquerlSyntaxError) as e:
        parse("AND breast_cancer")
    assert e.value.offset == 0
    with pytest.raises(SquerlSyntaxError) as e:
        parse("a AND (b OR")
    assert e.value.offset == len("a AND (b OR")
    with pytest.raises(SquerlSyntaxError) as e:
        parse('"é" AND %')  # offsets count UTF-8 bytes
    assert e.value.offset == len('"é" AND '.encode())
    with pytest.raises(SquerlSyntaxError):
        parse("BEFORE(a OR b, c)")


def test_names_resolve_against_ontology():
    assert parse("Tagrisso", ONTO) == Atom("osimertinib")
    assert parse("breast cancer AND tamoxifen", ONTO) == And(Atom("breast_cancer"), Atom("tamoxifen"))
    assert parse('"EGFR TKI"', ONTO) == Atom("egfr_tki")
    with pytest.raises(SquerlNameError) as e:
        parse("breast_cancr", ONTO)
    assert e.value.offset == 0 and "breast cancer" in e.value.suggestions


def test_keyword_names_need_quotes():
    assert to_text(Atom("AND")) == '"AND"'
    assert parse(to_text(Atom("AND"))) == Atom("AND")


NAMES = ["a", "b_c", "x1", "breast_cancer", "EGFR TKI", "AND", 'we"ird']
atom_st = st.builds(
    Atom, st.sampled_from(NAMES), st.sampled_from(["asserted", "negated"]),
    st.lists(st.builds(Filter, st.sampled_from(["stage", "grade"]), st.sampled_from(["=", "!=", ">=", "<="]),
                       st.sampled_from(["II", "IV", "high grade"])), max_size=2).map(tuple))
ast_st = st.recursive(
    st.one_of(atom_st, st.builds(Before, atom_st, atom_st)),
    lambda kids: st.one_of(st.builds(And, kids, kids), st.builds(Or, kids, kids),
                           st.builds(Except, kids, kids), st.builds(Not, kids)),
    max_leaves=8)


@settings(max_examples=400, deadline=None)
@given(ast=ast_st)
def test_print_parse_round_trip(ast):
    text = to_text(ast)
    assert parse(text) == ast
    assert to_text(parse(text)) == text


# -- closure ---------------------------------------------------------------------

def test_closure_examples():
    assert closure("osimertinib", ONTO) == {"osimertinib"}
    assert {"tki", "egfr_tki", "osimertinib"} <= closure("targeted_therapy", ONTO)
    assert closure("Tagrisso", BIG) == {"osimertinib"}


def _random_dag(rng: random.Random, n: int) -> Ontology:
    concepts = []
    for i in range(n):
        parents = tuple(sorted({f"n{j}" for j in rng.sample(range(i), min(i, rng.randint(0, 3)))}))
        concepts.append(Concept(f"n{i}", (), parents))
    return Ontology(concepts)


def test_closure_matches_dfs_on_random_dags():
    rng = random.Random(5)
    for _ in range(100):
        onto = _random_dag(rng, rng.randint(1, 40))
        for c in onto.concepts:
            assert set(onto.closure(c)) == dfs_reachable(onto.children, c)


def test_cycles_rejected():
    with pytest.raises(OntologyError, match="cycle"):
        Ontology([Concept("a", (), ("b",)), Concept("b", (), ("a",))])


# -- execution vs brute force ------------------------------------------------------

EXEC_CONCEPTS = ["cancer", "breast_cancer", "lung_cancer", "systemic_therapy", "targeted_therapy", "osimertinib",
                 "tamoxifen", "brca1_mutation", "pik3ca_mutation", "pregnancy", "hysterectomy"]
LEAVES = ["breast_cancer", "lung_cancer", "osimertinib", "tamoxifen", "brca1_mutation", "pik3ca_mutation",
          "pregnancy"]


def _random_patients(rng: random.Random, n: int) -> list[dict]:
    out = []
    for p in range(n):
        events, used = [], set()
        for i in range(rng.randint(0, 6)):
            c = rng.choice(LEAVES)
            pol = "negated" if c.endswith("mutation") and rng.random() < 0.5 else "asserted"
            if c in used:
                continue  # keep abstractions conflict-free
            used.add(c)
            day = dt.date(2015, 1, 1) + dt.timedelta(days=rng.randint(0, 2000))
            attrs = {"stage": rng.choice(["I", "II", "III", "IV"])} if c.endswith("cancer") else {}
            date = None if rng.random() < 0.1 else day.isoformat()
            events.append({"concept": c, "polarity": pol, "start": date, "end": date, "attributes": attrs})
        out.append({"patient_id": f"P{p:03d}", "events": events})
    return out


def _random_ast(rng: random.Random, depth: int = 0):
    def atom():
        c = rng.choice(EXEC_CONCEPTS)
        filters = ()
        if c.endswith("cancer") and rng.random() < 0.3:
            filters = (Filter("stage", rng.choice([">=", "<=", "=", "!="]), rng.choice(["I", "II", "III", "IV"])),)
        return Atom(c, "negated" if rng.random() < 0.2 else "asserted", filters)

    r = rng.random()
    if depth >= 3 or r < 0.3:
        return atom()
    if r < 0.4:
        return Before(atom(), atom())
    if r < 0.5:
        return Not(_random_ast(rng, depth + 1))
    op = rng.choice([And, Or, Except])
    return op(_random_ast(rng, depth + 1), _random_ast(rng, depth + 1))


def test_execute_matches_brute_force_interpreter():
    rng = random.Random(17)
    parents = parents_of(ONTO)
    for trial in range(4):
        patients = _random_patients(rng, 30)
        kb = build_kb_from_abstractions(patients, ONTO)
        for _ in range(50):
            ast = _random_ast(rng)
            want = {p["patient_id"] for p in patients if eligible(ast, p["events"], parents)}
            assert execute(ast, kb).patient_ids == want, to_text(ast)


@settings(max_examples=150, deadline=None)
@given(seed=st.integers(0, 10_000))
def test_algebraic_laws(seed):
    rng = random.Random(seed)
    kb = build_kb_from_abstractions(_random_patients(rng, 25), ONTO)
    a, b = _random_ast(rng, 1), _random_ast(rng, 1)
    A, B = execute(a, kb).patient_ids, execute(b, kb).patient_ids
    assert execute(And(a, b), kb).patient_ids == A & B
    assert execute(Or(a, b), kb).patient_ids == A | B
    assert execute(Except(a, b), kb).patient_ids & B == set()
    assert execute(Except(a, b), kb).patient_ids == A - B
    assert execute(Not(a), kb).patient_ids == kb.universe() - A
    assert execute(And(a, b), kb).patient_ids == execute(And(b, a), kb).patient_ids


def test_neg_is_not_complement():
    patients = [{"patient_id": "p1", "events": [{"concept": "brca1_mutation", "polarity": "negated",
                                                  "start": "2020-01-01", "end": "2020-01-01"}]},
                {"patient_id": "p2", "events": []}]
    kb = build_kb_from_abstractions(patients, ONTO)
    assert execute(parse("NEG brca1_mutation"), kb).patient_ids == {"p1"}
    assert execute(parse("NOT brca1_mutation"), kb).patient_ids == {"p1", "p2"}


def test_before_fails_closed_and_is_strict():
    patients = [{"patient_id": "same", "events": [
        {"concept": "breast_cancer", "start": "2020-01-01", "end": "2020-01-01"},
        {"concept": "pregnancy", "start": "2020-01-01", "end": "2020-01-01"}]},
        {"patient_id": "undated", "events": [{"concept": "breast_cancer"}, {"concept": "pregnancy"}]}]
    kb = build_kb_from_abstractions(patients, ONTO)
    assert len(execute(parse("BEFORE(breast_cancer, pregnancy)"), kb)) == 0


def test_unknown_attribute_never_matches():
    patients = [{"patient_id": "p", "events": [{"concept": "breast_cancer", "start": "2020-01-01",
                                                 "end": "2020-01-01"}]}]
    kb = build_kb_from_abstractions(patients, ONTO)
    assert len(execute(parse("breast_cancer[stage!=II]"), kb)) == 0


# -- natural-language templates ------------------------------------------------------

def test_translate_examples():
    assert translate_nl("Find me patients with breast cancer", BIG) == "breast_cancer"
    assert translate_nl("patients treated with Tagrisso", BIG) == "osimertinib"
    with pytest.raises(UntranslatableQuery):
        translate_nl("who had a bad week in March", BIG)


def test_render_translate_inverse_over_generated_shapes():
    samples = ["breast_cancer AND NEG brca1_mutation", "nsclc[stage>=III] AND osimertinib",
               "BEFORE(breast_cancer, pregnancy)", "lung_cancer OR breast_cancer",
               "breast_cancer EXCEPT tamoxifen", "breast_cancer AND egfr_mutation AND osimertinib",
               "breast_cancer[stage<=II]", "breast_cancer[stage=IV]"]
    for s in samples:
        ast = parse(s, BIG)
        assert parse(translate_nl(render_nl(ast, BIG), BIG), BIG) == ast, s
