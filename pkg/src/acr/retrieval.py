"""Retriever-only and retrieve-then-read cohort baselines."""

from __future__ import annotations

import datetime as dt
import logging
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from importlib import resources
from typing import Mapping, Protocol, Sequence

import httpx

from acr.cohort import Cohort
from acr.corpus import Chunk
from acr.http import EndpointConfig, ExternalServiceError, JsonClient
from acr.index import Hit, VectorIndex
from acr.io import sha256_text
from acr.kb.consolidate import consolidate
from acr.kb.extract import RuleExtractor
from acr.kb.store import build_kb
from acr.ontology import Ontology
from acr.squerl.ast import Node
from acr.squerl.engine import execute

log = logging.getLogger(__name__)

DEFAULT_TOP_K = 1000
DEFAULT_CONTEXT_BUDGET = 128_000
DEFAULT_MAX_CALLS = 3
DEFAULT_MAX_CHUNKS = 64
PROMPT_RESERVE = 4_000
TEMPERATURE = 0.0
TOP_P = 0.95

PROMPT_TEMPLATE = resources.files("acr").joinpath("prompts/reader.txt").read_text(encoding="utf-8")
PROMPT_HASH = sha256_text(PROMPT_TEMPLATE)


class RetrievalError(ValueError):
    pass


# -- retriever-only ------------------------------------------------------------

def retrieve_hits(index: VectorIndex, query_text: str, k: int, embedder) -> list[Hit]:
    if len(index) == 0:
        raise RetrievalError("index is empty")
    index.check_embedder(embedder)
    return index.search(embedder.embed_one(query_text), k)


def cohort_from_hits(hits: Sequence[Hit], aggregate: str = "max") -> Cohort:
    """Group chunk hits by patient; each patient's score is the max (or mean) of its chunk scores."""
    per: dict[str, list[float]] = {}
    for h in hits:
        per.setdefault(h.patient_id, []).append(h.score)
    if aggregate == "max":
        scores = {p: max(s) for p, s in per.items()}
    elif aggregate == "mean":
        scores = {p: sum(s) / len(s) for p, s in per.items()}
    else:
        raise ValueError(f"unknown aggregate {aggregate!r}")
    return Cohort.ranked(scores)


def retrieve_cohort(index: VectorIndex, query_text: str, k: int, embedder, aggregate: str = "max") -> Cohort:
    return cohort_from_hits(retrieve_hits(index, query_text, k, embedder), aggregate)


# -- reader stage --------------------------------------------------------------

@dataclass
class ReaderVerdict:
    patient_id: str
    decision: str
    evidence_chunk_ids: list[str] = field(default_factory=list)
    calls_used: int = 0
    indeterminate: bool = False
    error: str | None = None

    def to_json(self) -> dict:
        return {
            "patient_id": self.patient_id,
            "decision": self.decision,
            "evidence_chunk_ids": self.evidence_chunk_ids,
            "calls_used": self.calls_used,
            "indeterminate": self.indeterminate,
            "error": self.error,
        }


class Reader(Protocol):
    def answer(self, query_text: str, query_ast: Node | None, chunks: Sequence[Chunk], reprompt: bool = False) -> str:
        ...


def pack_patient_context(hits: Sequence[tuple[Chunk, float]], context_budget: int = DEFAULT_CONTEXT_BUDGET,
                         max_chunks: int = DEFAULT_MAX_CHUNKS) -> list[Chunk]:
    """Highest-scoring chunks first (ties by chunk_id), cut before the token budget or chunk cap is exceeded."""
    ordered = sorted(hits, key=lambda h: (-h[1], h[0].chunk_id))
    out, used = [], 0
    for chunk, _ in ordered:
        if len(out) >= max_chunks or used + chunk.n_tokens > context_budget:
            break
        out.append(chunk)
        used += chunk.n_tokens
    return out


def split_calls(chunks: Sequence[Chunk], call_budget: int) -> list[list[Chunk]]:
    groups: list[list[Chunk]] = []
    used = 0
    for c in chunks:
        if not groups or used + c.n_tokens > call_budget:
            groups.append([])
            used = 0
        groups[-1].append(c)
        used += c.n_tokens
    return groups


_YES = re.compile(r"^\W*(yes)\b", re.IGNORECASE)
_NO = re.compile(r"^\W*(no)\b", re.IGNORECASE)


def normalize_answer(raw: str | None) -> str | None:
    if raw is None:
        return None
    if _YES.match(raw):
        return "yes"
    if _NO.match(raw):
        return "no"
    return None


def read_patient(patient_id: str, query_text: str, chunks: Sequence[Chunk], reader: Reader,
                 max_calls: int = DEFAULT_MAX_CALLS, query_ast: Node | None = None,
                 call_budget: int = DEFAULT_CONTEXT_BUDGET - PROMPT_RESERVE) -> ReaderVerdict:
    """Ask the reader about one patient; evidence beyond one call is split across at most ``max_calls``.

    Calls are OR-combined and stop at the first yes. An answer that is neither
    yes nor no gets one reprompt, then counts as no and is flagged indeterminate.
    Transport failures exclude the patient with an error flag.
    """
    if max_calls < 1:
        raise ValueError("max_calls must be >= 1")
    verdict = ReaderVerdict(patient_id, "no")
    if not chunks:
        return verdict
    for group in split_calls(chunks, call_budget):
        if verdict.calls_used >= max_calls:
            break
        try:
            verdict.calls_used += 1
            answer = normalize_answer(reader.answer(query_text, query_ast, group))
            if answer is None and verdict.calls_used < max_calls:
                verdict.calls_used += 1
                answer = normalize_answer(reader.answer(query_text, query_ast, group, reprompt=True))
        except ExternalServiceError as exc:
            verdict.decision, verdict.error = "no", str(exc)
            verdict.evidence_chunk_ids = []
            return verdict
        if answer is None:
            verdict.indeterminate = True
            continue
        if answer == "yes":
            verdict.decision = "yes"
            verdict.evidence_chunk_ids = [c.chunk_id for c in group]
            verdict.indeterminate = False
            return verdict
    return verdict


class MockReader:
    """Deterministic offline reader: answers from the rule extractor applied to the given chunks only."""

    name = "mock"

    def __init__(self, ontology: Ontology, doc_dates: Mapping[str, dt.date] | None = None,
                 extractor: RuleExtractor | None = None):
        self.ontology = ontology
        self.doc_dates = doc_dates or {}
        self.extractor = extractor or RuleExtractor(ontology)
        self._facts: dict[str, list] = {}

    def _chunk_facts(self, chunk: Chunk):
        hit = self._facts.get(chunk.chunk_id)
        if hit is None:
            date = self.doc_dates.get(chunk.doc_id)
            hit = self._facts[chunk.chunk_id] = self.extractor.extract_text(chunk.text, chunk.chunk_id, date)
        return hit

    def decide(self, query_ast: Node, chunks: Sequence[Chunk]) -> bool:
        if not chunks:
            return False
        pid = chunks[0].patient_id
        facts = sorted((f for c in chunks for f in self._chunk_facts(c)), key=lambda f: f.sort_key())
        model = consolidate(facts, self.ontology, pid)
        return pid in execute(query_ast, build_kb([model], self.ontology))

    def answer(self, query_text, query_ast, chunks, reprompt=False) -> str:
        if query_ast is None:
            raise ValueError("the mock reader needs a parsed query")
        return "YES" if self.decide(query_ast, chunks) else "NO"


def mock_reader(query_ast: Node, chunks: Sequence[Chunk], ontology: Ontology,
                doc_dates: Mapping[str, dt.date] | None = None) -> str:
    return "yes" if MockReader(ontology, doc_dates).decide(query_ast, chunks) else "no"


def render_prompt(query_text: str, chunks: Sequence[Chunk]) -> str:
    passages = "\n".join(f"[{i}] {c.text}" for i, c in enumerate(chunks, start=1))
    return PROMPT_TEMPLATE.format(query=query_text, passages=passages)


class ChatReader:
    """Reader backed by a chat-completion endpoint."""

    name = "external"

    def __init__(self, config: EndpointConfig, transport: httpx.BaseTransport | None = None, sleep=None):
        kwargs = {} if sleep is None else {"sleep": sleep}
        self.config = config
        self.client = JsonClient(config, transport=transport, **kwargs)

    def answer(self, query_text, query_ast, chunks, reprompt=False) -> str:
        messages = [
            {"role": "system", "content": "You answer cohort screening questions with YES or NO only."},
            {"role": "user", "content": render_prompt(query_text, chunks)},
        ]
        if reprompt:
            messages.append({"role": "user", "content": "Reply with exactly one word: YES or NO."})
        body = self.client.post({
            "model": self.config.model,
            "temperature": TEMPERATURE,
            "top_p": TOP_P,
            "messages": messages,
        })
        try:
            return body["choices"][0]["message"]["content"]
        except (KeyError, IndexError, TypeError) as exc:
            raise ExternalServiceError(f"unexpected chat payload: {exc}") from exc


# -- retrieve-then-read -------------------------------------------------------

@dataclass
class ReadResult:
    cohort: Cohort
    retrieved: Cohort
    verdicts: dict[str, ReaderVerdict]

    def errors(self) -> dict[str, str]:
        return {p: v.error for p, v in self.verdicts.items() if v.error}

    def manifest(self, config_hash: str = "") -> dict:
        return {
            "config_hash": config_hash,
            "prompt_hash": PROMPT_HASH,
            "verdicts": [self.verdicts[p].to_json() for p in sorted(self.verdicts)],
            "calls_used": sum(v.calls_used for v in self.verdicts.values()),
            "errors": self.errors(),
        }


def retrieve_then_read(index: VectorIndex, query_text: str, k: int, embedder, reader: Reader,
                       chunks: Mapping[str, Chunk], query_ast: Node | None = None,
                       max_calls: int = DEFAULT_MAX_CALLS, context_budget: int = DEFAULT_CONTEXT_BUDGET,
                       max_chunks: int = DEFAULT_MAX_CHUNKS, call_budget: int | None = None,
                       jobs: int = 1, hits: Sequence[Hit] | None = None) -> ReadResult:
    """Keep only retrieved patients the reader accepts, preserving the retriever's order."""
    if hits is None:
        hits = retrieve_hits(index, query_text, k, embedder)
    retrieved = cohort_from_hits(hits)
    per_patient: dict[str, list[tuple[Chunk, float]]] = {}
    for h in hits:
        per_patient.setdefault(h.patient_id, []).append((chunks[h.chunk_id], h.score))
    if call_budget is None:
        call_budget = max(1, context_budget - PROMPT_RESERVE)

    def one(pid: str) -> ReaderVerdict:
        packed = pack_patient_context(per_patient[pid], context_budget, max_chunks)
        return read_patient(pid, query_text, packed, reader, max_calls, query_ast, call_budget)

    order = list(retrieved.ranking)
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(one, order))
    else:
        results = [one(p) for p in order]
    verdicts = {v.patient_id: v for v in results}
    for pid, msg in ((v.patient_id, v.error) for v in results if v.error):
        log.warning("reader failed for patient %s: %s", pid, msg)
    survivors = [p for p in order if verdicts[p].decision == "yes" and not verdicts[p].error]
    cohort = Cohort(frozenset(survivors), tuple(survivors), {p: retrieved.scores[p] for p in survivors})
    return ReadResult(cohort, retrieved, verdicts)
