"""Small JSON-over-HTTP helper with bounded exponential backoff, shared by external clients."""

from __future__ import annotations

import logging
import os
import time
from dataclasses import dataclass

import httpx

log = logging.getLogger(__name__)

RETRYABLE_STATUS = {408, 425, 429, 500, 502, 503, 504}


class ExternalServiceError(RuntimeError):
    """An external embedding/LLM endpoint failed after all retries."""


@dataclass
class EndpointConfig:
    url: str
    model: str
    auth_env: str | None = None
    max_attempts: int = 4
    backoff_base: float = 0.5
    backoff_max: float = 8.0
    timeout: float = 60.0
    max_batch: int = 64

    def headers(self) -> dict[str, str]:
        headers = {"Content-Type": "application/json"}
        if self.auth_env:
            token = os.environ.get(self.auth_env)
            if not token:
                raise ExternalServiceError(f"environment variable {self.auth_env} is not set")
            headers["Authorization"] = f"Bearer {token}"
        return headers


class JsonClient:
    def __init__(self, config: EndpointConfig, transport: httpx.BaseTransport | None = None,
                 sleep=time.sleep):
        self.config = config
        self._client = httpx.Client(timeout=config.timeout, transport=transport)
        self._sleep = sleep
        self.retries = 0

    def close(self) -> None:
        self._client.close()

    def post(self, payload: dict) -> dict:
        cfg = self.config
        last = "no attempt made"
        for attempt in range(1, cfg.max_attempts + 1):
            try:
                resp = self._client.post(cfg.url, json=payload, headers=cfg.headers())
            except httpx.TransportError as exc:
                last = f"transport error: {exc}"
            else:
                if resp.status_code < 300:
                    try:
                        return resp.json()
                    except ValueError as exc:
                        raise ExternalServiceError(f"non-JSON response from {cfg.url}") from exc
                excerpt = resp.text[:200]
                if resp.status_code not in RETRYABLE_STATUS:
                    raise ExternalServiceError(f"HTTP {resp.status_code} from {cfg.url}: {excerpt}")
                last = f"HTTP {resp.status_code}: {excerpt}"
            if attempt == cfg.max_attempts:
                break
            delay = min(cfg.backoff_max, cfg.backoff_base * 2 ** (attempt - 1))
            self.retries += 1
            log.warning("retry %d/%d for %s after %s (sleep %.2fs)",
                        attempt, cfg.max_attempts - 1, cfg.url, last, delay)
            self._sleep(delay)
        raise ExternalServiceError(f"{cfg.url} failed after {cfg.max_attempts} attempts: {last}")
