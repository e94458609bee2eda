"""Exact dense vector index with cosine top-k search and a versioned binary file format."""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from acr.corpus import Chunk
from acr.http import ExternalServiceError
from acr.io import atomic_write_bytes

MAGIC = b"ACRVIDX\x00"
VERSION = 1
_HEADER = struct.Struct("<8sIIQH")
_WIDTHS = struct.Struct("<HHH")


class VectorIndexError(ValueError):
    pass


class FingerprintMismatch(VectorIndexError):
    pass


@dataclass(frozen=True)
class Hit:
    chunk_id: str
    patient_id: str
    score: float
    doc_id: str = ""


class VectorIndex:
    """Vectors are held row-contiguous in chunk_id order, so row order is the tie-break order."""

    def __init__(self, chunk_ids: Sequence[str], patient_ids: Sequence[str], doc_ids: Sequence[str],
                 vectors: np.ndarray, fingerprint: str):
        vectors = np.ascontiguousarray(vectors, dtype=np.float64)
        if vectors.ndim != 2 or vectors.shape[0] != len(chunk_ids):
            raise VectorIndexError("vector matrix shape does not match entry count")
        if len(set(chunk_ids)) != len(chunk_ids):
            raise VectorIndexError("duplicate chunk_id in index")
        order = sorted(range(len(chunk_ids)), key=chunk_ids.__getitem__)
        self.chunk_ids = [chunk_ids[i] for i in order]
        self.patient_ids = [patient_ids[i] for i in order]
        self.doc_ids = [doc_ids[i] for i in order]
        self.vectors = vectors[order] if order != list(range(len(order))) else vectors
        self.fingerprint = fingerprint

    @property
    def d(self) -> int:
        return self.vectors.shape[1]

    def __len__(self) -> int:
        return len(self.chunk_ids)

    def check_embedder(self, embedder) -> None:
        if embedder.fingerprint != self.fingerprint:
            raise FingerprintMismatch(
                f"index built with {self.fingerprint!r}, query embedder is {embedder.fingerprint!r}"
            )

    def search(self, query_vec: np.ndarray, k: int) -> list[Hit]:
        """Top-k by cosine, descending; equal scores ordered by ascending chunk_id."""
        if k < 1:
            raise ValueError("k must be >= 1")
        q = np.asarray(query_vec, dtype=np.float64)
        if q.shape != (self.d,):
            raise VectorIndexError(f"query dimension {q.shape} does not match index dimension {self.d}")
        neg = -(self.vectors @ q)
        n = len(neg)
        if k < n:
            thr = np.partition(neg, k - 1)[k - 1]
            cand = np.flatnonzero(neg <= thr)
        else:
            cand = np.arange(n)
        top = cand[np.lexsort((cand, neg[cand]))][:k]
        return [Hit(self.chunk_ids[i], self.patient_ids[i], float(-neg[i]), self.doc_ids[i]) for i in top]

    # -- persistence -------------------------------------------------------

    def _record_dtype(self, widths):
        cw, pw, dw = widths
        return np.dtype([("cid", f"S{cw}"), ("pid", f"S{pw}"), ("did", f"S{dw}"), ("vec", "<f8", (self.d,))])

    def to_bytes(self) -> bytes:
        enc = [[s.encode("utf-8") for s in col] for col in (self.chunk_ids, self.patient_ids, self.doc_ids)]
        widths = tuple(max((len(b) for b in col), default=1) or 1 for col in enc)
        fp = self.fingerprint.encode("utf-8")
        rec = np.zeros(len(self), dtype=self._record_dtype(widths))
        rec["cid"], rec["pid"], rec["did"] = enc
        rec["vec"] = self.vectors
        head = _HEADER.pack(MAGIC, VERSION, self.d, len(self), len(fp)) + fp + _WIDTHS.pack(*widths)
        return head + rec.tobytes()

    @classmethod
    def from_bytes(cls, data: bytes) -> "VectorIndex":
        if len(data) < _HEADER.size or data[:8] != MAGIC:
            raise VectorIndexError("not a vector index file (bad magic)")
        _, version, d, count, fplen = _HEADER.unpack_from(data, 0)
        if version != VERSION:
            raise VectorIndexError(f"unsupported index version {version}")
        off = _HEADER.size
        fingerprint = data[off:off + fplen].decode("utf-8")
        off += fplen
        widths = _WIDTHS.unpack_from(data, off)
        off += _WIDTHS.size
        cw, pw, dw = widths
        dtype = np.dtype([("cid", f"S{cw}"), ("pid", f"S{pw}"), ("did", f"S{dw}"), ("vec", "<f8", (d,))])
        if len(data) - off != dtype.itemsize * count:
            raise VectorIndexError("truncated or oversized index file")
        rec = np.frombuffer(data, dtype=dtype, count=count, offset=off)
        dec = lambda col: [b.decode("utf-8") for b in rec[col].tolist()]  # noqa: E731
        return cls(dec("cid"), dec("pid"), dec("did"), np.array(rec["vec"]), fingerprint)

    def save(self, path: str | Path) -> None:
        atomic_write_bytes(path, self.to_bytes())

    @classmethod
    def load(cls, path: str | Path) -> "VectorIndex":
        return cls.from_bytes(Path(path).read_bytes())


def build_index(chunks: Sequence[Chunk], embedder, batch_size: int = 4096) -> VectorIndex:
    if not chunks:
        raise VectorIndexError("cannot build an index from zero chunks")
    seen: set[str] = set()
    for c in chunks:
        if c.chunk_id in seen:
            raise VectorIndexError(f"duplicate chunk_id {c.chunk_id!r}")
        seen.add(c.chunk_id)
    parts = []
    for i in range(0, len(chunks), batch_size):
        batch = chunks[i:i + batch_size]
        try:
            parts.append(embedder.embed([c.text for c in batch]))
        except ExternalServiceError as exc:
            raise ExternalServiceError(f"embedding failed near chunk {batch[0].chunk_id!r}: {exc}") from exc
        except Exception as exc:
            raise VectorIndexError(f"embedding failed near chunk {batch[0].chunk_id!r}: {exc}") from exc
    return VectorIndex(
        [c.chunk_id for c in chunks], [c.patient_id for c in chunks], [c.doc_id for c in chunks],
        np.vstack(parts), embedder.fingerprint,
    )


def search(index: VectorIndex, query_vec: np.ndarray, k: int) -> list[Hit]:
    return index.search(query_vec, k)
