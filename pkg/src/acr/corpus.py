"""Longitudinal patient records: loading, validation, tokenization and chunking."""

from __future__ import annotations

import datetime as dt
import json
import math
from dataclasses import dataclass
from pathlib import Path
from types import MappingProxyType
from typing import Iterable, Iterator, Mapping

DEFAULT_CHUNK_SIZE = 1000
DEFAULT_OVERLAP = 100


class CorpusError(ValueError):
    """Raised for malformed or inconsistent corpus input."""


@dataclass(frozen=True)
class Document:
    patient_id: str
    doc_id: str
    authored_at: dt.date
    doc_type: str
    text: str

    def to_json(self) -> dict:
        return {
            "patient_id": self.patient_id,
            "doc_id": self.doc_id,
            "authored_at": self.authored_at.isoformat(),
            "doc_type": self.doc_type,
            "text": self.text,
        }


@dataclass(frozen=True)
class Chunk:
    chunk_id: str
    patient_id: str
    doc_id: str
    token_start: int
    token_end: int
    text: str

    @property
    def n_tokens(self) -> int:
        return self.token_end - self.token_start


def _doc_sort_key(doc: Document):
    return (doc.authored_at, doc.doc_id)


class Corpus:
    """Immutable mapping of patient_id to that patient's time-ordered documents."""

    def __init__(self, documents: Iterable[Document]):
        by_patient: dict[str, list[Document]] = {}
        seen: set[str] = set()
        for doc in documents:
            if doc.doc_id in seen:
                raise CorpusError(f"duplicate doc_id {doc.doc_id!r}")
            if not doc.text.strip():
                raise CorpusError(f"empty text in document {doc.doc_id!r}")
            seen.add(doc.doc_id)
            by_patient.setdefault(doc.patient_id, []).append(doc)
        self._patients = MappingProxyType(
            {pid: tuple(sorted(docs, key=_doc_sort_key)) for pid, docs in sorted(by_patient.items())}
        )

    @property
    def patients(self) -> Mapping[str, tuple[Document, ...]]:
        return self._patients

    def __len__(self) -> int:
        return len(self._patients)

    def __contains__(self, patient_id: object) -> bool:
        return patient_id in self._patients

    def patient_ids(self) -> list[str]:
        return list(self._patients)

    def documents(self) -> Iterator[Document]:
        for docs in self._patients.values():
            yield from docs

    def n_documents(self) -> int:
        return sum(len(docs) for docs in self._patients.values())

    def doc_counts(self) -> dict[str, int]:
        return {pid: len(docs) for pid, docs in self._patients.items()}

    def get_document(self, doc_id: str) -> Document:
        if not hasattr(self, "_by_doc"):
            self._by_doc = {d.doc_id: d for d in self.documents()}
        return self._by_doc[doc_id]


def _parse_date(value, where: str) -> dt.date:
    if not isinstance(value, str):
        raise CorpusError(f"{where}: authored_at must be an ISO date string")
    try:
        return dt.date.fromisoformat(value)
    except ValueError as exc:
        raise CorpusError(f"{where}: invalid date {value!r}") from exc


def document_from_json(obj: dict, where: str = "record") -> Document:
    try:
        patient_id, doc_id = str(obj["patient_id"]), str(obj["doc_id"])
        text, doc_type = obj["text"], str(obj.get("doc_type", ""))
        authored = obj["authored_at"]
    except (KeyError, TypeError) as exc:
        raise CorpusError(f"{where}: missing field {exc}") from exc
    if not isinstance(text, str) or not text.strip():
        raise CorpusError(f"{where}: empty text in document {doc_id!r}")
    return Document(patient_id, doc_id, _parse_date(authored, where), doc_type, text)


def load_corpus(path: str | Path) -> Corpus:
    """Read a JSONL corpus, one document per line (a ``_meta`` provenance line is skipped).

    Errors carry the 1-based line number; a duplicated doc_id names both lines.
    """
    docs: list[Document] = []
    first_line: dict[str, int] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            where = f"line {lineno}"
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise CorpusError(f"{where}: malformed JSON ({exc.msg})") from exc
            if not isinstance(obj, dict):
                raise CorpusError(f"{where}: expected a JSON object")
            if "_meta" in obj:
                continue
            doc = document_from_json(obj, where)
            if doc.doc_id in first_line:
                raise CorpusError(
                    f"duplicate doc_id {doc.doc_id!r} on lines {first_line[doc.doc_id]} and {lineno}"
                )
            first_line[doc.doc_id] = lineno
            docs.append(doc)
    return Corpus(docs)


def iter_corpus_lines(corpus: Corpus) -> Iterator[str]:
    for doc in corpus.documents():
        yield json.dumps(doc.to_json(), ensure_ascii=False, sort_keys=True)


def tokenize(text: str) -> list[str]:
    return text.split()


def chunk_count(n_tokens: int, chunk_size: int, overlap: int) -> int:
    stride = chunk_size - overlap
    return max(1, math.ceil((n_tokens - overlap) / stride))


def chunk_document(
    doc: Document, chunk_size: int = DEFAULT_CHUNK_SIZE, overlap: int = DEFAULT_OVERLAP
) -> list[Chunk]:
    """Split a document into sliding token windows with stride ``chunk_size - overlap``.

    The last window may be shorter; a document no longer than ``chunk_size``
    yields a single chunk.
    """
    if chunk_size < 1:
        raise ValueError("chunk_size must be >= 1")
    if not 0 <= overlap < chunk_size:
        raise ValueError(f"overlap ({overlap}) must be in [0, chunk_size={chunk_size})")
    tokens = tokenize(doc.text)
    stride = chunk_size - overlap
    n = chunk_count(len(tokens), chunk_size, overlap)
    width = max(4, len(str(n - 1)))
    chunks = []
    for i in range(n):
        start = i * stride
        end = min(start + chunk_size, len(tokens))
        chunks.append(
            Chunk(
                chunk_id=f"{doc.doc_id}:{i:0{width}d}",
                patient_id=doc.patient_id,
                doc_id=doc.doc_id,
                token_start=start,
                token_end=end,
                text=" ".join(tokens[start:end]),
            )
        )
    return chunks


def chunk_corpus(
    corpus: Corpus, chunk_size: int = DEFAULT_CHUNK_SIZE, overlap: int = DEFAULT_OVERLAP
) -> list[Chunk]:
    out: list[Chunk] = []
    for doc in corpus.documents():
        out.extend(chunk_document(doc, chunk_size, overlap))
    return out
