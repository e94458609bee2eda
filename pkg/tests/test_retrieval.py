import httpx
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from acr.cohort import Cohort
from acr.corpus import Chunk, Corpus, Document, chunk_corpus
from acr.embed import HashingEmbedder
from acr.http import EndpointConfig, ExternalServiceError
from acr.index import Hit, build_index
from acr.kb.store import build_kb_from_corpus
from acr.retrieval import (
    DEFAULT_CONTEXT_BUDGET,
    DEFAULT_TOP_K,
    TEMPERATURE,
    TOP_P,
    ChatReader,
    MockReader,
    cohort_from_hits,
    normalize_answer,
    pack_patient_context,
    read_patient,
    retrieve_cohort,
    retrieve_then_read,
)
from acr.squerl import execute, parse
from fixtures import D, small_ontology

ONTO = small_ontology()


def _chunk(cid, pid, text, n=None):
    return Chunk(cid, pid, f"{pid}-d", 0, n if n is not None else len(text.split()), text)


class ScriptedReader:
    """Returns answers from a list, recording every call."""

    def __init__(self, answers):
        self.answers = list(answers)
        self.calls = []

    def answer(self, query_text, query_ast, chunks, reprompt=False):
        self.calls.append((len(chunks), reprompt))
        a = self.answers.pop(0)
        if isinstance(a, Exception):
            raise a
        return a


def test_defaults():
    assert DEFAULT_TOP_K == 1000 and DEFAULT_CONTEXT_BUDGET == 128_000
    assert (TEMPERATURE, TOP_P) == (0.0, 0.95)


def test_cohort_dedups_patients():
    hits = [Hit("c1", "p1", 0.9), Hit("c2", "p1", 0.8), Hit("c3", "p2", 0.7)]
    c = cohort_from_hits(hits)
    assert c.patient_ids == {"p1", "p2"} and c.ranking == ("p1", "p2")


def test_query_equal_to_unique_chunk_returns_its_patient():
    docs = [Document(f"p{i}", f"d{i}", D(2020, 1, 1), "note", t) for i, t in
            enumerate(["breast cancer stage II", "lung cancer EGFR", "pregnancy confirmed today"])]
    chunks = chunk_corpus(Corpus(docs))
    e = HashingEmbedder(256)
    idx = build_index(chunks, e)
    assert retrieve_cohort(idx, "pregnancy confirmed today", 1, e).patient_ids == {"p2"}


def test_pack_keeps_top_scores_and_breaks_ties_by_id():
    hits = [(_chunk(f"c{i}", "p", "x"), s) for i, s in enumerate([0.1, 0.9, 0.5, 0.7, 0.3])]
    assert [c.chunk_id for c in pack_patient_context(hits, max_chunks=3)] == ["c1", "c3", "c2"]
    tied = [(_chunk("b", "p", "x"), 0.5), (_chunk("a", "p", "x"), 0.5)]
    assert [c.chunk_id for c in pack_patient_context(tied)] == ["a", "b"]


def test_pack_respects_token_budget():
    hits = [(_chunk(f"c{i}", "p", "x", n=400), 1.0 - i / 10) for i in range(5)]
    assert len(pack_patient_context(hits, context_budget=1000)) == 2


def test_empty_chunks_no_calls():
    r = ScriptedReader([])
    v = read_patient("p", "q", [], r)
    assert v.decision == "no" and v.calls_used == 0 and r.calls == []


def test_call_split_short_circuits_on_yes():
    chunks = [_chunk(f"c{i}", "p", "x", n=100) for i in range(3)]
    r = ScriptedReader(["NO", "Yes.", "NO"])
    v = read_patient("p", "q", chunks, r, max_calls=3, call_budget=100)
    assert v.decision == "yes" and v.calls_used == 2
    assert v.evidence_chunk_ids == ["c1"]


def test_reprompt_counts_toward_budget():
    chunks = [_chunk(f"c{i}", "p", "x", n=100) for i in range(3)]
    r = ScriptedReader(["maybe", "unclear", "yes"])
    v = read_patient("p", "q", chunks, r, max_calls=3, call_budget=100)
    # call 1 + reprompt exhaust two calls, the third group is asked once
    assert r.calls == [(1, False), (1, True), (1, False)]
    assert v.decision == "yes" and v.calls_used == 3


def test_indeterminate_counts_as_no():
    r = ScriptedReader(["perhaps", "who knows"])
    v = read_patient("p", "q", [_chunk("c", "p", "x")], r)
    assert v.decision == "no" and v.indeterminate


def test_reader_error_excludes_patient():
    r = ScriptedReader([ExternalServiceError("down")])
    v = read_patient("p", "q", [_chunk("c", "p", "x")], r)
    assert v.decision == "no" and v.error == "down"


@pytest.mark.parametrize("raw,want", [("YES", "yes"), (" no, because", "no"), ("Yes.", "yes"),
                                      ("yesterday", None), ("", None), (None, None)])
def test_normalize_answer(raw, want):
    assert normalize_answer(raw) == want


# -- mock reader ---------------------------------------------------------------

def test_mock_reader_contract():
    r = MockReader(ONTO)
    q = parse("breast_cancer", ONTO)
    assert r.answer("", q, [_chunk("c", "p", "Diagnosed with breast cancer in 2019.")]) == "YES"
    q_and = parse("breast_cancer AND tamoxifen", ONTO)
    assert r.answer("", q_and, [_chunk("c", "p", "Diagnosed with breast cancer in 2019.")]) == "NO"
    assert r.answer("", parse("NEG brca1_mutation", ONTO),
                    [_chunk("c2", "p", "Genetic testing negative for BRCA1 mutation.")]) == "YES"


def _corpus():
    texts = {
        "p1": ["Diagnosed with breast cancer @date{2019-01-01}, stage II.", "Started tamoxifen @date{2019-03-01}."],
        "p2": ["Lung cancer @date{2018-01-01} stage IV.", "Started Tagrisso @date{2018-02-01}."],
        "p3": ["Breast carcinoma @date{2017-05-01}.", "No evidence of BRCA1 mutation."],
        "p4": ["Routine visit, no complaints.", "Follow up in clinic."],
    }
    docs = []
    for pid, ts in texts.items():
        for i, t in enumerate(ts):
            docs.append(Document(pid, f"{pid}-d{i}", D(2020, 1, 1 + i), "note", t))
    return Corpus(docs)


def test_read_equals_full_kb_when_all_facts_retrieved():
    corpus = _corpus()
    chunks = chunk_corpus(corpus)
    e = HashingEmbedder(64)
    idx = build_index(chunks, e)
    kb = build_kb_from_corpus(corpus, ONTO)
    dates = {d.doc_id: d.authored_at for d in corpus.documents()}
    cmap = {c.chunk_id: c for c in chunks}
    for text in ["breast_cancer", "breast_cancer AND tamoxifen", "egfr_tki", "cancer EXCEPT tamoxifen",
                 "NEG brca1_mutation", "BEFORE(lung_cancer, osimertinib)"]:
        ast = parse(text, ONTO)
        # k covers every chunk, so each patient's whole record reaches the reader
        res = retrieve_then_read(idx, text, len(chunks), e, MockReader(ONTO, dates), cmap, query_ast=ast)
        assert res.cohort.patient_ids == execute(ast, kb).patient_ids, text


def test_reader_rejecting_all_gives_empty_cohort():
    corpus = _corpus()
    chunks = chunk_corpus(corpus)
    e = HashingEmbedder(64)
    idx = build_index(chunks, e)

    class No:
        def answer(self, *a, **k):
            return "NO"

    res = retrieve_then_read(idx, "cancer", 5, e, No(), {c.chunk_id: c for c in chunks})
    assert len(res.cohort) == 0 and len(res.retrieved) > 0


@settings(max_examples=60, deadline=None)
@given(k=st.integers(1, 8), answers=st.lists(st.sampled_from(["YES", "NO", "??"]), min_size=40, max_size=40),
       jobs=st.sampled_from([1, 3]))
def test_subset_law(k, answers, jobs):
    corpus = _corpus()
    chunks = chunk_corpus(corpus)
    e = HashingEmbedder(64)
    idx = build_index(chunks, e)
    by_pid = {}

    class Fixed:
        # deterministic per patient so thread scheduling cannot matter
        def answer(self, q, ast, cs, reprompt=False):
            pid = cs[0].patient_id
            return by_pid.setdefault(pid, answers[int(pid[1:]) % len(answers)])

    res = retrieve_then_read(idx, "breast cancer", k, e, Fixed(), {c.chunk_id: c for c in chunks}, jobs=jobs)
    assert res.cohort.patient_ids <= retrieve_cohort(idx, "breast cancer", k, e).patient_ids
    assert list(res.cohort.ranking) == [p for p in res.retrieved.ranking if p in res.cohort]


# -- chat reader over a mock transport ---------------------------------------------

def test_chat_reader_request_and_reprompt():
    bodies = []

    def handler(request):
        import json
        bodies.append(json.loads(request.content))
        return httpx.Response(200, json={"choices": [{"message": {"content": "YES"}}]})

    cfg = EndpointConfig(url="http://llm.test/v1/chat/completions", model="m")
    reader = ChatReader(cfg, transport=httpx.MockTransport(handler))
    assert reader.answer("patients with breast cancer", None, [_chunk("c", "p", "breast cancer")]) == "YES"
    reader.answer("q", None, [_chunk("c", "p", "x")], reprompt=True)
    assert bodies[0]["temperature"] == 0.0 and bodies[0]["top_p"] == 0.95
    assert "breast cancer" in bodies[0]["messages"][1]["content"]
    assert len(bodies[1]["messages"]) == 3


def test_chat_reader_bad_payload():
    cfg = EndpointConfig(url="http://llm.test/x", model="m")
    reader = ChatReader(cfg, transport=httpx.MockTransport(lambda r: httpx.Response(200, json={"oops": 1})))
    with pytest.raises(ExternalServiceError):
        reader.answer("q", None, [_chunk("c", "p", "x")])


def test_ranked_cohort_helpers():
    c = Cohort.ranked({"b": 1.0, "a": 1.0, "c": 2.0})
    assert c.ranking == ("c", "a", "b")
    with pytest.raises(ValueError):
        Cohort(frozenset({"a"}), ("a", "b"))
