"""Library-level wiring of the benchmark: every CLI subcommand is a thin call into this module."""

from __future__ import annotations

import json
import logging
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

from acr.cohort import Cohort
from acr.config import RunConfig
from acr.corpus import Chunk, Corpus, chunk_corpus, iter_corpus_lines, load_corpus
from acr.evaluate.consistency import run_consistency
from acr.evaluate.gold import GoldMatrix, load_cohorts, read_meta, save_cohorts
from acr.evaluate.report import build_report
from acr.index import VectorIndex, build_index
from acr.io import atomic_write_text, stamp, write_json, write_jsonl
from acr.kb.extract import RuleExtractor
from acr.kb.store import KnowledgeBase, build_kb_from_corpus, load_abstractions
from acr.ontology import Ontology
from acr.retrieval import ChatReader, MockReader, retrieve_cohort, retrieve_hits, retrieve_then_read
from acr.squerl.bank import QueryRecord, load_bank, save_bank
from acr.squerl.engine import execute
from acr.synthgen import gen_gold, gen_ontology, gen_patients, gen_query_bank

log = logging.getLogger(__name__)

SYSTEMS = ("retriever", "read", "symbolic")
SYSTEM_NAMES = {"retriever": "retriever-only", "read": "retrieve-then-read", "symbolic": "symbolic"}
FILES = {
    "ontology": "ontology.json",
    "corpus": "corpus.jsonl",
    "abstractions": "abstractions.jsonl",
    "bank": "bank.jsonl",
    "gold": "gold.jsonl",
    "log": "generation_log.jsonl",
    "index": "index.bin",
    "index_meta": "index.meta.json",
    "kb": "kb.json",
    "conflicts": "conflicts.jsonl",
}


class ProvenanceMismatch(ValueError):
    """Artifacts were produced under different configurations."""


def _meta(config: RunConfig, **extra) -> dict:
    return {**stamp(config.config_hash(), config.seed), **extra}


# -- synth -------------------------------------------------------------------------

def synth(config: RunConfig, out_dir: str | Path) -> dict[str, Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    params = config.generator
    meta = _meta(config, generator=params.to_json())
    onto = gen_ontology(params.seed)
    corpus, truth = gen_patients(params, onto)
    bank = gen_query_bank(params.seed, onto, truth.abstractions, params, alpha=config.alpha, beta=config.beta)
    gold = gen_gold(truth.abstractions, bank, onto)
    paths = {k: out / FILES[k] for k in ("ontology", "corpus", "abstractions", "bank", "gold", "log")}

    onto_obj = onto.to_json()
    onto_obj["_meta"] = meta
    write_json(paths["ontology"], onto_obj)
    atomic_write_text(paths["corpus"], "\n".join(
        [_dumps({"_meta": meta})] + list(iter_corpus_lines(corpus))) + "\n")
    write_jsonl(paths["abstractions"], [{"_meta": meta}] + truth.abstractions)
    save_bank(paths["bank"], bank, meta)
    gold.save(paths["gold"], meta)
    write_jsonl(paths["log"], [{"_meta": meta}] + truth.log)
    return paths


def _dumps(obj) -> str:
    return json.dumps(obj, ensure_ascii=False, sort_keys=True)


def load_ontology(path: str | Path) -> Ontology:
    return Ontology.load(path)


# -- index / kb ----------------------------------------------------------------------

def chunks_for(config: RunConfig, corpus: Corpus) -> list[Chunk]:
    return list(chunk_corpus(corpus, config.chunk_size, config.overlap))


def build_index_artifact(config: RunConfig, corpus: Corpus, out_path: str | Path,
                         embedder=None) -> VectorIndex:
    embedder = embedder or config.make_embedder()
    index = build_index(chunks_for(config, corpus), embedder)
    out_path = Path(out_path)
    index.save(out_path)
    # the binary index carries its embedder fingerprint; provenance goes in a sidecar
    write_json(out_path.with_suffix(".meta.json"),
               _meta(config, chunk_size=config.chunk_size, overlap=config.overlap, entries=len(index),
                     fingerprint=index.fingerprint))
    return index


def build_kb_artifact(config: RunConfig, corpus: Corpus, ontology: Ontology, out_path: str | Path,
                      conflicts_path: str | Path | None = None) -> KnowledgeBase:
    kb = build_kb_from_corpus(corpus, ontology, RuleExtractor(ontology),
                              merge_window_days=config.merge_window_days, policy=config.policy)
    kb.save(out_path, _meta(config))
    if conflicts_path is not None:
        write_jsonl(conflicts_path, [{"_meta": _meta(config)}] + kb.conflicts())
    return kb


# -- query ---------------------------------------------------------------------------

@dataclass
class QueryContext:
    """Everything the three systems may need; unused members can stay None."""

    config: RunConfig
    ontology: Ontology | None = None
    corpus: Corpus | None = None
    index: VectorIndex | None = None
    kb: KnowledgeBase | None = None
    embedder: object = None
    reader: object = None
    jobs: int = 1
    _chunks: dict[str, Chunk] | None = field(default=None, repr=False)

    def chunk_map(self) -> dict[str, Chunk]:
        if self._chunks is None:
            if self.corpus is None:
                raise ValueError("retrieve-then-read needs the corpus to recover chunk text")
            self._chunks = {c.chunk_id: c for c in chunks_for(self.config, self.corpus)}
            if self.index is not None and len(self._chunks) != len(self.index):
                raise ProvenanceMismatch(f"corpus yields {len(self._chunks)} chunks but the index holds "
                                         f"{len(self.index)}; rebuild the index with this configuration")
        return self._chunks

    def get_embedder(self):
        if self.embedder is None:
            self.embedder = self.config.make_embedder()
        return self.embedder

    def get_reader(self):
        if self.reader is None:
            if self.config.reader.kind == "mock":
                if self.ontology is None or self.corpus is None:
                    raise ValueError("the mock reader needs the ontology and corpus")
                dates = {d.doc_id: d.authored_at for d in self.corpus.documents()}
                self.reader = MockReader(self.ontology, dates)
            else:
                self.reader = ChatReader(self.config.reader.endpoint)
        return self.reader


def run_query(ctx: QueryContext, system: str, rec: QueryRecord) -> tuple[Cohort, dict | None]:
    cfg = ctx.config
    text = rec.nl_text or rec.squerl_text
    if system == "symbolic":
        if ctx.kb is None or ctx.ontology is None:
            raise ValueError("the symbolic system needs a knowledge base and ontology")
        return execute(rec.ast(ctx.ontology), ctx.kb), None
    if ctx.index is None:
        raise ValueError(f"the {system} system needs a vector index")
    if system == "retriever":
        return retrieve_cohort(ctx.index, text, cfg.top_k_chunks, ctx.get_embedder()), None
    if system == "read":
        ast = rec.ast(ctx.ontology) if ctx.ontology is not None else None
        hits = retrieve_hits(ctx.index, text, cfg.top_k_chunks, ctx.get_embedder())
        res = retrieve_then_read(ctx.index, text, cfg.top_k_chunks, ctx.get_embedder(), ctx.get_reader(),
                                 ctx.chunk_map(), query_ast=ast, max_calls=cfg.max_reader_calls,
                                 context_budget=cfg.context_budget, max_chunks=cfg.max_chunks_per_patient,
                                 jobs=ctx.jobs, hits=hits)
        man = res.manifest(cfg.config_hash())
        man["query_id"] = rec.query_id
        return res.cohort, man
    raise ValueError(f"unknown system {system!r}; choose from {', '.join(SYSTEMS)}")


def run_bank(ctx: QueryContext, system: str, bank: Sequence[QueryRecord]) -> tuple[dict[str, Cohort], list[dict]]:
    cohorts, manifests = {}, []
    for rec in bank:
        cohort, man = run_query(ctx, system, rec)
        cohorts[rec.query_id] = cohort
        if man is not None:
            manifests.append(man)
    return cohorts, manifests


def save_query_outputs(config: RunConfig, system: str, cohorts: dict[str, Cohort], out_path: str | Path,
                       manifests: list[dict] | None = None) -> None:
    save_cohorts(out_path, cohorts, _meta(config, system=system))
    if manifests:
        write_jsonl(Path(out_path).with_suffix(".reader.jsonl"), [{"_meta": _meta(config)}] + manifests)


# -- eval ----------------------------------------------------------------------------

def check_provenance(config_hash: str, *metas: dict, force: bool = False) -> None:
    for m in metas:
        h = (m or {}).get("config_hash")
        if h and h != config_hash and not force:
            raise ProvenanceMismatch(f"artifact config hash {h} differs from {config_hash}; use --force to score anyway")


def evaluate(config: RunConfig, bank: Sequence[QueryRecord], gold: GoldMatrix, cohorts: dict[str, Cohort],
             system: str = "", doc_counts: dict[str, int] | None = None, consistency: bool = True) -> dict:
    rows = run_consistency(bank, cohorts) if consistency else None
    return build_report(bank, gold, cohorts, system=system, alpha=config.alpha, beta=config.beta,
                        doc_counts=doc_counts, config_hash=config.config_hash(), seed=config.seed,
                        consistency=rows)


def load_eval_inputs(bank_path, gold_path, cohorts_path):
    bank = load_bank(bank_path)
    gold = GoldMatrix.load(gold_path)
    cohorts, meta = load_cohorts(cohorts_path)
    return bank, gold, cohorts, meta, read_meta(gold_path)


# -- end to end ----------------------------------------------------------------------

@dataclass
class BenchmarkResult:
    reports: dict[str, dict]
    timings: dict[str, float]
    paths: dict[str, Path]
    cohorts: dict[str, dict[str, Cohort]]


def run_benchmark(config: RunConfig, out_dir: str | Path, systems: Sequence[str] = SYSTEMS,
                  jobs: int = 1) -> BenchmarkResult:
    """synth -> index -> build-kb -> query (each system) -> eval, writing every artifact under out_dir."""
    out = Path(out_dir)
    timings: dict[str, float] = {}
    t = time.perf_counter()
    paths = synth(config, out)
    timings["synth"] = time.perf_counter() - t

    t = time.perf_counter()
    onto = load_ontology(paths["ontology"])
    corpus = load_corpus(paths["corpus"])
    bank = load_bank(paths["bank"], onto)
    gold = GoldMatrix.load(paths["gold"])
    timings["load"] = time.perf_counter() - t

    ctx = QueryContext(config, ontology=onto, corpus=corpus, jobs=jobs)
    if any(s in ("retriever", "read") for s in systems):
        t = time.perf_counter()
        paths["index"] = out / FILES["index"]
        ctx.index = build_index_artifact(config, corpus, paths["index"], ctx.get_embedder())
        timings["index"] = time.perf_counter() - t
    if "symbolic" in systems:
        t = time.perf_counter()
        paths["kb"] = out / FILES["kb"]
        ctx.kb = build_kb_artifact(config, corpus, onto, paths["kb"], out / FILES["conflicts"])
        timings["build_kb"] = time.perf_counter() - t

    reports, all_cohorts = {}, {}
    doc_counts = corpus.doc_counts()
    for system in systems:
        t = time.perf_counter()
        cohorts, manifests = run_bank(ctx, system, bank)
        paths[f"cohorts_{system}"] = out / f"cohorts.{system}.jsonl"
        save_query_outputs(config, system, cohorts, paths[f"cohorts_{system}"], manifests)
        timings[f"query_{system}"] = time.perf_counter() - t
        rep = evaluate(config, bank, gold, cohorts, SYSTEM_NAMES[system], doc_counts)
        paths[f"report_{system}"] = out / f"report.{system}.json"
        write_json(paths[f"report_{system}"], rep)
        reports[system] = rep
        all_cohorts[system] = cohorts
    return BenchmarkResult(reports, timings, paths, all_cohorts)


def load_doc_counts(corpus_path: str | Path) -> dict[str, int]:
    return load_corpus(corpus_path).doc_counts()


__all__ = [
    "BenchmarkResult", "FILES", "ProvenanceMismatch", "QueryContext", "SYSTEMS", "SYSTEM_NAMES",
    "build_index_artifact", "build_kb_artifact", "check_provenance", "chunks_for", "evaluate",
    "load_abstractions", "load_doc_counts", "load_eval_inputs", "load_ontology", "run_bank",
    "run_benchmark", "run_query", "save_query_outputs", "synth",
]
