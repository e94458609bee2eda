import datetime as dt

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from acr.corpus import Document
from acr.kb.consolidate import ResolutionPolicy, check_model, consolidate, noisy_or
from acr.kb.extract import RuleExtractor, extract_facts
from acr.kb.model import ASSERTED, NEGATED, Fact
from acr.kb.store import (
    KnowledgeBase,
    KnowledgeBaseError,
    build_kb,
    build_kb_from_corpus,
    model_from_abstraction,
)
from acr.squerl import execute, parse
from fixtures import D, paradox_corpus, small_ontology
from oracles import is_a, parents_of

ONTO = small_ontology()


def _doc(text, date=D(2020, 2, 3)):
    return Document("p", "d1", date, "note", text)


def _fact(concept, polarity=ASSERTED, date=D(2020, 1, 1), conf=0.8, doc="d", pos=0, attrs=()):
    return Fact(concept, polarity, tuple(attrs), date, conf, (doc, pos, pos + 1), date)


# -- extraction ----------------------------------------------------------------

def test_extract_stage_and_default_date():
    facts = extract_facts(_doc("Patient diagnosed with breast cancer, stage II."), ONTO)
    assert len(facts) == 1
    f = facts[0]
    assert (f.concept, f.polarity, f.attrs, f.event_date) == ("breast_cancer", ASSERTED, {"stage": "II"}, D(2020, 2, 3))


def test_extract_negation_cue():
    facts = extract_facts(_doc("Genetic testing negative for BRCA1 mutation."), ONTO)
    assert [(f.concept, f.polarity) for f in facts] == [("brca1_mutation", NEGATED)]


def test_negation_is_sentence_scoped():
    facts = extract_facts(_doc("No fever. Breast cancer confirmed."), ONTO)
    assert [(f.concept, f.polarity) for f in facts] == [("breast_cancer", ASSERTED)]


def test_extract_synonym_and_date_tag():
    facts = extract_facts(_doc("Started Tagrisso @date{2019-07-04} today."), ONTO)
    assert [(f.concept, f.event_date) for f in facts] == [("osimertinib", D(2019, 7, 4))]


def test_implied_absence_shares_provenance():
    facts = extract_facts(_doc("Underwent hysterectomy @date{2016-06-01}."), ONTO)
    by = {f.concept: f for f in facts}
    assert by["uterus"].polarity == NEGATED and by["uterus"].provenance == by["hysterectomy"].provenance


def test_concept_confidence_uses_nearest_ancestor():
    ex = RuleExtractor(ONTO, concept_confidence={"systemic_therapy": 0.6, "tki": 0.9})
    assert ex.confidence_for("osimertinib") == 0.9
    assert ex.confidence_for("tamoxifen") == 0.6
    assert ex.confidence_for("pregnancy") == 0.8


# -- consolidation ---------------------------------------------------------------

def test_noisy_or_merge():
    facts = [_fact("breast_cancer", date=D(2020, 1, 1), pos=0), _fact("breast_cancer", date=D(2020, 3, 31), pos=1)]
    m = consolidate(facts, ONTO)
    active = m.active_events()
    assert len(active) == 1
    assert active[0].confidence == pytest.approx(1 - 0.2 ** 2, abs=1e-12)
    assert len(active[0].support) == 2
    assert noisy_or(0.8, 0.8) == pytest.approx(0.96)


def test_outside_merge_window_makes_two_events():
    facts = [_fact("breast_cancer", date=D(2015, 1, 1), pos=0), _fact("breast_cancer", date=D(2020, 1, 1), pos=1)]
    assert len(consolidate(facts, ONTO, merge_window_days=365).active_events()) == 2


def test_polarity_conflict_confidence_tiebreak():
    facts = sorted([_fact("brca1_mutation", ASSERTED, conf=0.9, pos=0),
                    _fact("brca1_mutation", NEGATED, conf=0.5, pos=1)], key=lambda f: f.sort_key())
    m = consolidate(facts, ONTO)
    status = {e.polarity: e.status for e in m.events}
    assert status == {ASSERTED: "active", NEGATED: "retracted"}
    assert len(m.conflicts) == 1 and m.conflicts[0].kind == "polarity"
    assert m.conflicts[0].decided_by == "confidence"


def test_unsorted_facts_rejected():
    with pytest.raises(ValueError, match="time-ordered"):
        consolidate([_fact("pregnancy", date=D(2020, 1, 1)), _fact("pregnancy", date=D(2019, 1, 1))], ONTO)


def test_unknown_policy_rejected():
    with pytest.raises(ValueError, match="unknown resolution policy"):
        ResolutionPolicy.named("vibes")


def test_paradox_default_policy_keeps_pregnancy():
    kb = build_kb_from_corpus(paradox_corpus(), ONTO)
    model = kb.models["P1"]
    assert "P1" in execute(parse("BEFORE(breast_cancer, pregnancy)", ONTO), kb)
    constraint = [c for c in model.conflicts if c.kind == "constraint"]
    assert len(constraint) == 1 and len(model.conflicts) == 1
    loser = model.event(constraint[0].loser)
    assert (loser.concept, loser.polarity, loser.status) == ("uterus", NEGATED, "retracted")
    assert constraint[0].decided_by == "recency"


def test_paradox_confidence_policy_flips():
    ex = RuleExtractor(ONTO, concept_confidence={"hysterectomy": 0.95})
    kb = build_kb_from_corpus(paradox_corpus(), ONTO, ex, policy="confidence")
    model = kb.models["P1"]
    assert "P1" not in execute(parse("BEFORE(breast_cancer, pregnancy)", ONTO), kb)
    (c,) = model.conflicts
    assert model.event(c.loser).concept == "pregnancy"


# -- knowledge base ------------------------------------------------------------------

def test_postings_follow_the_isa_chain():
    m = model_from_abstraction("p", [{"concept": "osimertinib", "start": "2020-01-01", "end": "2020-01-01"}], ONTO)
    kb = build_kb([m], ONTO)
    for c in ("osimertinib", "egfr_tki", "tki", "targeted_therapy", "systemic_therapy"):
        assert [pid for pid, _ in kb.posted_events(c)] == ["p"]


def test_retracted_events_not_posted():
    kb = build_kb_from_corpus(paradox_corpus(), ONTO)
    assert list(kb.posted_events("uterus")) == []
    assert [pid for pid, _ in kb.posted_events("ovary")] == ["P1"]


def _brute_postings(kb: KnowledgeBase) -> dict:
    parents = parents_of(ONTO)
    out = {}
    for concept in ONTO.concepts:
        rows = []
        for pid, m in kb.models.items():
            for e in m.events:
                if e.active and is_a(e.concept, concept, parents):
                    rows.append((pid, e.event_id))
        if rows:
            out[concept] = sorted(rows)
    return out


def test_postings_match_brute_force_and_survive_reload(tmp_path):
    kb = build_kb_from_corpus(paradox_corpus(), ONTO)
    assert {k: sorted(v) for k, v in kb.postings.items()} == _brute_postings(kb)
    kb.save(tmp_path / "kb.json", {"config_hash": "x"})
    again = KnowledgeBase.load(tmp_path / "kb.json", ONTO)
    assert again.postings == kb.postings
    assert again.to_json() == kb.to_json()


def test_clean_abstraction():
    evs = [{"concept": "breast_cancer", "start": "2019-01-01", "end": "2019-01-01", "attributes": {"stage": "II"}},
           {"concept": "tamoxifen", "start": "2019-02-01", "end": "2019-02-01"},
           {"concept": "brca1_mutation", "polarity": "negated", "start": "2019-01-05", "end": "2019-01-05"}]
    m = model_from_abstraction("p", evs, ONTO)
    assert len(m.active_events()) == 3 and m.conflicts == []


def test_contradictory_abstraction_rejected():
    evs = [{"concept": "brca1_mutation", "start": "2019-01-01", "end": "2019-01-01"},
           {"concept": "brca1_mutation", "polarity": "negated", "start": "2019-01-01", "end": "2019-01-01"}]
    with pytest.raises(KnowledgeBaseError, match="invalid abstraction"):
        model_from_abstraction("p", evs, ONTO)


def test_duplicate_patient_rejected():
    m = model_from_abstraction("p", [], ONTO)
    with pytest.raises(KnowledgeBaseError):
        build_kb([m, m], ONTO)


# -- properties --------------------------------------------------------------------

CONCEPTS = ["breast_cancer", "lung_cancer", "osimertinib", "tamoxifen", "brca1_mutation", "pregnancy",
            "uterus", "hysterectomy", "ovary"]

fact_st = st.tuples(st.sampled_from(CONCEPTS), st.sampled_from([ASSERTED, NEGATED]),
                    st.integers(0, 2000), st.sampled_from([0.3, 0.5, 0.8, 0.9, 1.0]),
                    st.sampled_from([(), (("stage", "II"),), (("stage", "IV"),)]))


@settings(max_examples=200, deadline=None)
@given(raw=st.lists(fact_st, max_size=25), policy=st.sampled_from(["support", "confidence", "recency"]))
def test_consolidation_leaves_no_active_conflict(raw, policy):
    base = D(2015, 1, 1)
    facts = []
    for i, (c, pol, day, conf, attrs) in enumerate(raw):
        if ONTO.concepts[c].attributes_schema == {}:
            attrs = ()
        facts.append(Fact(c, pol, attrs, base + dt.timedelta(days=day), conf, ("d", i, i + 1),
                          base + dt.timedelta(days=day)))
    facts.sort(key=lambda f: f.sort_key())
    m = consolidate(facts, ONTO, "p", policy=policy)
    assert check_model(m, ONTO) == []
    assert sum(len(e.support) for e in m.events) == len(facts)
    assert all(0 < e.confidence <= 1 for e in m.events)
    retracted = [e for e in m.events if not e.active]
    assert len(retracted) == len(m.conflicts)
