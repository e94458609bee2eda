import dataclasses
from collections import Counter

import pytest

from acr.corpus import iter_corpus_lines
from acr.evaluate.metrics import BROAD, NARROW, SPARSE, ZERO, categorize
from acr.kb.store import build_kb_from_abstractions, model_from_abstraction, model_from_corpus_patient
from acr.squerl import And, Atom, execute, parse, translate_nl
from acr.squerl.ast import atoms
from acr.synthgen import (
    GenerationError,
    GeneratorParams,
    expert_class,
    expert_score,
    gen_gold,
    gen_ontology,
    gen_patient,
    gen_patients,
    gen_query_bank,
)
from acr.synthgen.ontology_gen import THERAPY_CHAIN
from oracles import eligible, parents_of

PARAMS = GeneratorParams(seed=42, n_patients=200, n_queries=60)


@pytest.fixture(scope="module")
def world():
    onto = gen_ontology(PARAMS.seed)
    corpus, truth = gen_patients(PARAMS, onto)
    bank = gen_query_bank(PARAMS.seed, onto, truth.abstractions, PARAMS)
    gold = gen_gold(truth.abstractions, bank, onto)
    return onto, corpus, truth, bank, gold


# -- ontology ----------------------------------------------------------------------

def test_ontology_is_deterministic_and_holds_the_chain():
    a, b = gen_ontology(42), gen_ontology(42)
    assert a.dumps() == b.dumps()
    for parent, child in zip(THERAPY_CHAIN, THERAPY_CHAIN[1:]):
        assert parent in a.concepts[child].parents
    assert a.resolve("Tagrisso") == "osimertinib"
    assert len(THERAPY_CHAIN) == 5


# -- patients ------------------------------------------------------------------------

def test_corpus_is_deterministic():
    p = dataclasses.replace(PARAMS, n_patients=30)
    onto = gen_ontology(p.seed)
    c1, t1 = gen_patients(p, onto)
    c2, t2 = gen_patients(p, onto)
    assert list(iter_corpus_lines(c1)) == list(iter_corpus_lines(c2))
    assert t1.abstractions == t2.abstractions and t1.log == t2.log


def test_patient_generation_is_independent_of_population_size():
    onto = gen_ontology(42)
    small, _ = gen_patients(dataclasses.replace(PARAMS, n_patients=5), onto)
    a, docs, _ = gen_patient(3, onto, PARAMS)
    assert [d.to_json() for d in small.patients[a["patient_id"]]] == [d.to_json() for d in docs]


def test_clean_render_round_trips_through_extraction():
    p = dataclasses.replace(PARAMS, contradiction_rate=0.0, paraphrase_rate=1.0)
    onto = gen_ontology(p.seed)
    for i in range(0, 200, 4):
        a, docs, _ = gen_patient(i, onto, p)
        got = Counter(e.key() for e in model_from_corpus_patient(docs, a["patient_id"], onto).active_events())
        want = Counter(e.key() for e in model_from_abstraction(a["patient_id"], a["events"], onto).active_events())
        assert got == want, a["patient_id"]


def test_paraphrase_rate_leaves_truth_and_gold_alone(world):
    onto, _, truth, bank, gold = world
    p = dataclasses.replace(PARAMS, paraphrase_rate=0.0)
    _, truth0 = gen_patients(p, onto)
    assert truth0.abstractions == truth.abstractions
    assert gen_gold(truth0.abstractions, bank, onto).gold == gold.gold


def test_abstractions_are_valid_models(world):
    onto, corpus, truth, _, _ = world
    kb = build_kb_from_abstractions(truth.abstractions, onto)
    assert set(kb.models) == set(corpus.patient_ids())


def test_bad_params_rejected(world):
    with pytest.raises(ValueError):
        GeneratorParams(seed=1, n_patients=0)
    with pytest.raises(ValueError):
        GeneratorParams(seed=1, contradiction_rate=1.5)
    onto, _, truth, _, _ = world
    with pytest.raises(GenerationError, match="subtype-chain"):
        gen_query_bank(1, onto, truth.abstractions, dataclasses.replace(PARAMS, n_queries=3))


# -- query bank ------------------------------------------------------------------------

def test_bank_is_deterministic(world):
    onto, _, truth, bank, _ = world
    again = gen_query_bank(PARAMS.seed, onto, truth.abstractions, PARAMS)
    assert [r.to_json() for r in again] == [r.to_json() for r in bank]
    assert len(bank) == PARAMS.n_queries


def test_category_coverage(world):
    _, _, _, bank, gold = world
    cats = Counter(categorize(len(gold.gold[r.query_id])) for r in bank)
    assert all(cats[k] >= 3 for k in (BROAD, NARROW, SPARSE, ZERO)), cats
    for r in bank:
        assert r.zero_result == (len(gold.gold[r.query_id]) == 0)


def test_relations_are_well_formed(world):
    onto, _, _, bank, gold = world
    by_id = {r.query_id: r for r in bank}
    kinds = Counter()
    for r in bank:
        for kind, other in r.relations:
            kinds[kind] += 1
            a, b = by_id[other].ast(onto), r.ast(onto)
            if kind == "paraphrase_of":
                assert a == b and r.squerl_text != by_id[other].squerl_text
                assert gold.gold[r.query_id] == gold.gold[other]
            elif kind == "child_of":
                assert isinstance(b, And) and b.left == a and isinstance(b.right, Atom)
                assert gold.gold[r.query_id].patient_ids <= gold.gold[other].patient_ids
            elif kind == "intersection_of":
                assert isinstance(b, And) and b.left == a
                assert gold.gold[r.query_id].patient_ids <= gold.gold[other].patient_ids
    assert kinds["child_of"] >= len(THERAPY_CHAIN) - 1
    assert kinds["paraphrase_of"] >= 1 and kinds["intersection_of"] >= 1


def test_nl_text_translates_to_the_same_cohort(world):
    onto, _, truth, bank, gold = world
    kb = build_kb_from_abstractions(truth.abstractions, onto)
    for r in bank:
        ast = parse(translate_nl(r.nl_text, onto), onto)
        assert execute(ast, kb).patient_ids == gold.gold[r.query_id].patient_ids, r.query_id


def test_gold_matches_brute_force_interpreter(world):
    onto, _, truth, bank, gold = world
    parents = parents_of(onto)
    for r in bank:
        ast = r.ast(onto)
        want = {a["patient_id"] for a in truth.abstractions if eligible(ast, a["events"], parents)}
        assert gold.gold[r.query_id].patient_ids == want, r.squerl_text


# -- expert rubric ---------------------------------------------------------------------

@pytest.mark.parametrize("text,score,cls", [
    ("breast_cancer", 0, "Base"),
    ("breast_cancer AND NEG brca1_mutation", 2, "Medium"),
    ("breast_cancer[stage>=III]", 1, "Low"),
    ("osimertinib", 1, "Low"),
    ("nsclc[stage>=III] AND osimertinib AND NEG egfr_mutation", 5, "Hard"),
])
def test_expert_rubric(text, score, cls):
    onto = gen_ontology(42)
    ast = parse(text, onto)
    assert expert_score(ast, onto) == score and expert_class(ast, onto) == cls


def test_bank_classes_follow_rubric(world):
    onto, _, _, bank, _ = world
    for r in bank:
        assert r.expert_class == expert_class(r.ast(onto), onto)
        assert all(a.concept in onto for a in atoms(r.ast(onto)))
