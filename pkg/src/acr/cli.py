"""Command-line entry point: argument handling and wiring only (behaviour lives in acr.pipeline).

Exit codes: 0 ok, 1 usage or configuration error, 2 data error, 3 external-service error.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import os
import sys
from pathlib import Path

from acr import pipeline
from acr.config import ConfigError, RunConfig, load_config, with_seed
from acr.corpus import load_corpus
from acr.embed import EmbeddingError
from acr.evaluate.consistency import run_consistency, total_violations
from acr.evaluate.gold import load_cohorts
from acr.evaluate.report import render_comparison, render_consistency, render_csv, render_markdown
from acr.http import ExternalServiceError
from acr.index import VectorIndex
from acr.io import atomic_write_text, dumps_canonical, read_json, write_json
from acr.kb.store import KnowledgeBase
from acr.squerl.bank import QueryRecord, load_bank
from acr.squerl.parser import SquerlError, parse
from acr.squerl.translate import UntranslatableQuery, translate_nl

log = logging.getLogger("acr")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_EXTERNAL = 0, 1, 2, 3


class UsageError(Exception):
    pass


def _emit(text: str, out: str | None) -> None:
    if out:
        atomic_write_text(out, text if text.endswith("\n") else text + "\n")
    else:
        sys.stdout.write(text if text.endswith("\n") else text + "\n")


def _config(args) -> RunConfig:
    cfg = load_config(args.config)
    if getattr(args, "seed", None) is not None:
        cfg = with_seed(cfg, args.seed)
    return cfg


def _require(path, what: str) -> Path:
    if path is None:
        raise UsageError(f"--{what} is required")
    p = Path(path)
    if not p.exists():
        raise FileNotFoundError(f"{what} file not found: {p}")
    return p


# -- subcommands -----------------------------------------------------------------------

def cmd_synth(args) -> int:
    cfg = _config(args)
    gen = cfg.generator
    overrides = {k: v for k, v in (("n_patients", args.patients), ("n_queries", args.queries),
                                   ("contradiction_rate", args.contradiction_rate),
                                   ("paraphrase_rate", args.paraphrase_rate)) if v is not None}
    if args.no_coupling:
        overrides["contradiction_length_coupling"] = False
    if overrides:
        cfg = dataclasses.replace(cfg, generator=dataclasses.replace(gen, **overrides))
    out = args.out or cfg.paths.get("out") or "."
    paths = pipeline.synth(cfg, out)
    _emit(json.dumps({k: str(v) for k, v in paths.items()}, indent=1), None)
    return EXIT_OK


def cmd_index(args) -> int:
    cfg = _config(args)
    corpus = load_corpus(_require(args.corpus, "corpus"))
    out = Path(args.out or pipeline.FILES["index"])
    if out.is_dir():
        out = out / pipeline.FILES["index"]
    index = pipeline.build_index_artifact(cfg, corpus, out)
    log.info("indexed %d chunks into %s", len(index), out)
    _emit(json.dumps({"index": str(out), "entries": len(index), "config_hash": cfg.config_hash()}), None)
    return EXIT_OK


def cmd_build_kb(args) -> int:
    cfg = _config(args)
    corpus = load_corpus(_require(args.corpus, "corpus"))
    onto = pipeline.load_ontology(_require(args.ontology, "ontology"))
    out = Path(args.out or pipeline.FILES["kb"])
    if out.is_dir():
        out = out / pipeline.FILES["kb"]
    audit = out.with_name(out.stem + ".conflicts.jsonl")
    kb = pipeline.build_kb_artifact(cfg, corpus, onto, out, audit)
    _emit(json.dumps({"kb": str(out), "patients": len(kb.patient_ids), "conflicts": len(kb.conflicts()),
                      "conflict_log": str(audit)}), None)
    return EXIT_OK


def cmd_query(args) -> int:
    cfg = _config(args)
    system = args.system
    onto = pipeline.load_ontology(args.ontology) if args.ontology else None
    ctx = pipeline.QueryContext(cfg, ontology=onto, jobs=args.jobs)
    if system in ("retriever", "read"):
        ctx.index = VectorIndex.load(_require(args.index, "index"))
        if system == "read":
            ctx.corpus = load_corpus(_require(args.corpus, "corpus"))
    else:
        if onto is None:
            raise UsageError("--ontology is required for the symbolic system")
        ctx.kb = KnowledgeBase.load(_require(args.kb, "kb"), onto)
    if system == "read" and cfg.reader.kind == "mock" and onto is None:
        raise UsageError("--ontology is required for the mock reader")

    if args.query is not None:
        squerl = args.query
        if system != "symbolic" or args.nl:
            if onto is None:
                raise UsageError("--ontology is required to interpret a natural-language query")
            squerl = translate_nl(args.query, onto)
        nl = args.query if (system != "symbolic" or args.nl) else ""
        try:
            parse(squerl, onto)
        except SquerlError as exc:
            raise UsageError(f"--query: {exc}") from exc
        bank = [QueryRecord("Q", nl, squerl)]
    else:
        bank = load_bank(_require(args.bank, "bank"), onto)
    cohorts, manifests = pipeline.run_bank(ctx, system, bank)
    if args.out:
        pipeline.save_query_outputs(cfg, system, cohorts, args.out, manifests)
    else:
        for qid, c in cohorts.items():
            sys.stdout.write(dumps_canonical(c.to_json(qid)) + "\n")
    return EXIT_OK


def cmd_eval(args) -> int:
    cfg = _config(args)
    bank, gold, cohorts, meta, gold_meta = pipeline.load_eval_inputs(
        _require(args.bank, "bank"), _require(args.gold, "gold"), _require(args.cohorts, "cohorts"))
    pipeline.check_provenance(cfg.config_hash(), meta, gold_meta, force=args.force)
    doc_counts = pipeline.load_doc_counts(args.corpus) if args.corpus else None
    system = args.system_name or meta.get("system", "")
    report = pipeline.evaluate(cfg, bank, gold, cohorts, system, doc_counts)
    if args.format == "json":
        text = json.dumps(report, indent=1, sort_keys=True)
    elif args.format == "md":
        text = render_markdown(report)
    else:
        text = render_csv(report)
    _emit(text, args.out)
    return EXIT_OK


def cmd_consistency(args) -> int:
    bank = load_bank(_require(args.bank, "bank"))
    cohorts, _ = load_cohorts(_require(args.cohorts, "cohorts"))
    rows = run_consistency(bank, cohorts)
    if args.format == "json":
        text = json.dumps({"rows": [r.to_json() for r in rows], "total_violations": total_violations(rows)},
                          indent=1, sort_keys=True)
    elif args.format == "md":
        text = render_consistency([r.to_json() for r in rows])
    else:
        raise UsageError("consistency supports --format json or md")
    _emit(text, args.out)
    return EXIT_OK


def cmd_report(args) -> int:
    reports = [read_json(_require(p, "report")) for p in args.reports]
    if args.format == "json":
        text = json.dumps(reports[0] if len(reports) == 1 else reports, indent=1, sort_keys=True)
    elif args.format == "csv":
        if len(reports) != 1:
            raise UsageError("csv output takes exactly one report")
        text = render_csv(reports[0])
    elif len(reports) == 1:
        text = render_markdown(reports[0])
    else:
        text = "# System comparison\n\n" + render_comparison(reports)
    _emit(text, args.out)
    return EXIT_OK


def cmd_run(args) -> int:
    cfg = _config(args)
    out = args.out or cfg.paths.get("out") or "benchmark"
    res = pipeline.run_benchmark(cfg, out, systems=args.systems, jobs=args.jobs)
    text = "# System comparison\n\n" + render_comparison(list(res.reports.values()))
    atomic_write_text(Path(out) / "comparison.md", text)
    write_json(Path(out) / "timings.json", res.timings)
    _emit(text, None)
    return EXIT_OK


# -- parser ------------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="TOML run configuration")
    common.add_argument("--seed", type=int, help="override the configured seed")
    common.add_argument("--jobs", type=int, default=os.cpu_count() or 1, help="worker threads (default: cores)")
    common.add_argument("--out", help="output file or directory")
    common.add_argument("--error-json", action="store_true", help="print errors as JSON on stderr")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="acr", description="Automatic cohort retrieval engine and benchmark harness.")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("synth", parents=[common], help="generate ontology, corpus, query bank and gold")
    s.add_argument("--patients", type=int)
    s.add_argument("--queries", type=int)
    s.add_argument("--contradiction-rate", type=float)
    s.add_argument("--paraphrase-rate", type=float)
    s.add_argument("--no-coupling", action="store_true", help="do not scale contradictions with record length")
    s.set_defaults(func=cmd_synth)

    s = sub.add_parser("index", parents=[common], help="chunk and embed a corpus into a vector index")
    s.add_argument("--corpus")
    s.set_defaults(func=cmd_index)

    s = sub.add_parser("build-kb", parents=[common], help="extract, consolidate and index patient models")
    s.add_argument("--corpus")
    s.add_argument("--ontology")
    s.set_defaults(func=cmd_build_kb)

    s = sub.add_parser("query", parents=[common], help="run one system over a query or a whole bank")
    s.add_argument("--system", choices=pipeline.SYSTEMS, required=True)
    s.add_argument("--bank")
    s.add_argument("--query", help="a single query (query-language text; natural language for retrieval systems)")
    s.add_argument("--nl", action="store_true", help="treat --query as natural language for the symbolic system")
    s.add_argument("--index")
    s.add_argument("--corpus")
    s.add_argument("--kb")
    s.add_argument("--ontology")
    s.set_defaults(func=cmd_query)

    s = sub.add_parser("eval", parents=[common], help="score a cohort file against gold")
    s.add_argument("--bank")
    s.add_argument("--gold")
    s.add_argument("--cohorts")
    s.add_argument("--corpus", help="corpus, for document-count strata")
    s.add_argument("--system-name")
    s.add_argument("--force", action="store_true", help="score despite a config-hash mismatch")
    s.add_argument("--format", choices=("json", "md", "csv"), default="json")
    s.set_defaults(func=cmd_eval)

    s = sub.add_parser("consistency", parents=[common], help="gold-free paraphrase/intersection/subtype checks")
    s.add_argument("--bank")
    s.add_argument("--cohorts")
    s.add_argument("--format", choices=("json", "md"), default="json")
    s.set_defaults(func=cmd_consistency)

    s = sub.add_parser("report", parents=[common], help="render report JSON as markdown or CSV")
    s.add_argument("reports", nargs="+")
    s.add_argument("--format", choices=("json", "md", "csv"), default="md")
    s.set_defaults(func=cmd_report)

    s = sub.add_parser("run", parents=[common], help="full benchmark: synth, index, build-kb, query, eval")
    s.add_argument("--systems", nargs="+", choices=pipeline.SYSTEMS, default=list(pipeline.SYSTEMS))
    s.set_defaults(func=cmd_run)
    return p


def _classify(exc: BaseException) -> int:
    if isinstance(exc, (ExternalServiceError, EmbeddingError)):
        return EXIT_EXTERNAL
    if isinstance(exc, (UsageError, ConfigError, UntranslatableQuery)):
        return EXIT_USAGE
    if isinstance(exc, (ValueError, KeyError, OSError)):
        return EXIT_DATA
    raise exc


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except Exception as exc:  # noqa: BLE001 - mapped to exit codes below
        code = _classify(exc)
        if args.error_json:
            sys.stderr.write(json.dumps({"error": type(exc).__name__, "message": str(exc), "exit_code": code}) + "\n")
        else:
            sys.stderr.write(f"acr {args.command}: {exc}\n")
        return code


if __name__ == "__main__":
    sys.exit(main())
