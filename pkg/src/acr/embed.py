"""Text embedders: a seeded feature-hashing embedder and an HTTP embedding client."""

from __future__ import annotations

import hashlib
import json
import string

import httpx
import numpy as np

from acr.corpus import tokenize
from acr.http import EndpointConfig, ExternalServiceError, JsonClient

DEFAULT_DIM = 256
_PUNCT = string.punctuation


class EmbeddingError(ValueError):
    pass


def _normalize(mat: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(mat, axis=1)
    zero = norms == 0
    out = np.divide(mat, norms[:, None], out=np.zeros_like(mat), where=~zero[:, None])
    out[zero, 0] = 1.0
    return out


class HashingEmbedder:
    """Signed feature hashing of token frequencies, L2-normalized.

    Tokens are lowercased and stripped of surrounding punctuation before hashing
    so "cancer," and "Cancer" land in the same bucket. Empty input maps to the
    unit vector on axis 0.
    """

    name = "hashing"

    def __init__(self, d: int = DEFAULT_DIM, seed: int = 0):
        if d < 2:
            raise ValueError("dimension must be >= 2")
        self.d = d
        self.seed = seed
        self._key = seed.to_bytes(8, "little", signed=True)
        self._cache: dict[str, tuple[int, float]] = {}

    @property
    def fingerprint(self) -> str:
        params = json.dumps({"name": self.name, "d": self.d, "seed": self.seed}, sort_keys=True)
        return f"{self.name}:{hashlib.sha256(params.encode()).hexdigest()[:16]}"

    def _slot(self, token: str) -> tuple[int, float]:
        hit = self._cache.get(token)
        if hit is None:
            h = int.from_bytes(hashlib.blake2b(token.encode(), digest_size=8, key=self._key).digest(), "little")
            hit = self._cache[token] = (h % self.d, 1.0 if (h >> 63) & 1 else -1.0)
        return hit

    def _raw(self, text: str, out: np.ndarray) -> None:
        for tok in tokenize(text):
            tok = tok.strip(_PUNCT).lower()
            if tok:
                idx, sign = self._slot(tok)
                out[idx] += sign

    def embed(self, texts: list[str]) -> np.ndarray:
        mat = np.zeros((len(texts), self.d), dtype=np.float64)
        for i, text in enumerate(texts):
            self._raw(text, mat[i])
        return _normalize(mat)

    def embed_one(self, text: str) -> np.ndarray:
        return self.embed([text])[0]


def embed_builtin(text: str, d: int = DEFAULT_DIM, seed: int = 0) -> np.ndarray:
    return HashingEmbedder(d, seed).embed_one(text)


class ExternalEmbedder:
    """Client for an embeddings endpoint speaking ``{"model", "input"} -> {"data": [{"embedding"}]}``."""

    name = "external"

    def __init__(self, config: EndpointConfig, transport: httpx.BaseTransport | None = None, sleep=None):
        self.config = config
        kwargs = {} if sleep is None else {"sleep": sleep}
        self.client = JsonClient(config, transport=transport, **kwargs)
        self.d: int | None = None

    @property
    def fingerprint(self) -> str:
        params = json.dumps({"url": self.config.url, "model": self.config.model}, sort_keys=True)
        return f"{self.name}:{hashlib.sha256(params.encode()).hexdigest()[:16]}"

    def _batch(self, texts: list[str]) -> np.ndarray:
        body = self.client.post({"model": self.config.model, "input": texts})
        try:
            vectors = [item["embedding"] for item in body["data"]]
        except (KeyError, TypeError) as exc:
            raise ExternalServiceError(f"unexpected embeddings payload: {exc}") from exc
        if len(vectors) != len(texts):
            raise EmbeddingError(f"expected {len(texts)} embeddings, got {len(vectors)}")
        if self.d is None and vectors:
            self.d = len(vectors[0])
        for v in vectors:
            if len(v) != self.d:
                raise EmbeddingError(f"dimension mismatch: expected {self.d}, got {len(v)}")
        mat = np.asarray(vectors, dtype=np.float64)
        if not np.all(np.isfinite(mat)):
            raise EmbeddingError("non-finite embedding values")
        return _normalize(mat)

    def embed(self, texts: list[str]) -> np.ndarray:
        step = max(1, self.config.max_batch)
        parts = [self._batch(texts[i:i + step]) for i in range(0, len(texts), step)]
        if not parts:
            return np.zeros((0, self.d or 0))
        return np.vstack(parts)

    def embed_one(self, text: str) -> np.ndarray:
        return self.embed([text])[0]


def embed_external(texts: list[str], config: EndpointConfig, transport=None) -> np.ndarray:
    return ExternalEmbedder(config, transport=transport).embed(texts)
