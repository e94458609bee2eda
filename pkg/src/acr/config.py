"""Run configuration: defaults, TOML loading and the config hash stamped into every artifact."""

from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from acr.embed import DEFAULT_DIM, ExternalEmbedder, HashingEmbedder
from acr.http import EndpointConfig
from acr.synthgen.patients import DistSpec, GeneratorParams


class ConfigError(ValueError):
    pass


@dataclass
class ComponentConfig:
    """``kind`` is builtin/mock (offline) or external (HTTP endpoint)."""

    kind: str
    d: int = DEFAULT_DIM
    seed: int = 0
    endpoint: EndpointConfig | None = None

    def to_json(self) -> dict:
        out = {"kind": self.kind}
        if self.kind in ("builtin",):
            out.update(d=self.d, seed=self.seed)
        if self.endpoint is not None:
            out["endpoint"] = dataclasses.asdict(self.endpoint)
        return out


@dataclass
class RunConfig:
    chunk_size: int = 1000
    overlap: int = 100
    top_k_chunks: int = 1000
    alpha: int = 50
    beta: int = 10
    max_reader_calls: int = 3
    context_budget: int = 128000
    max_chunks_per_patient: int = 64
    merge_window_days: int = 365
    policy: str = "support"
    seed: int = 42
    embedder: ComponentConfig = field(default_factory=lambda: ComponentConfig("builtin"))
    reader: ComponentConfig = field(default_factory=lambda: ComponentConfig("mock"))
    generator: GeneratorParams = field(default_factory=GeneratorParams)
    paths: dict[str, str] = field(default_factory=dict)

    def __post_init__(self):
        if self.overlap >= self.chunk_size or self.overlap < 0:
            raise ConfigError("need 0 <= overlap < chunk_size")
        if not 1 <= self.beta < self.alpha:
            raise ConfigError("need 1 <= beta < alpha")
        for name in ("top_k_chunks", "max_reader_calls", "context_budget", "max_chunks_per_patient"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be positive")
        if self.embedder.kind not in ("builtin", "external"):
            raise ConfigError(f"unknown embedder kind {self.embedder.kind!r}")
        if self.reader.kind not in ("mock", "external"):
            raise ConfigError(f"unknown reader kind {self.reader.kind!r}")
        for name, comp in (("embedder", self.embedder), ("reader", self.reader)):
            if comp.kind == "external" and comp.endpoint is None:
                raise ConfigError(f"external {name} needs an endpoint")

    def to_json(self) -> dict:
        """Everything that influences results (paths excluded)."""
        out = {k: getattr(self, k) for k in (
            "chunk_size", "overlap", "top_k_chunks", "alpha", "beta", "max_reader_calls", "context_budget",
            "max_chunks_per_patient", "merge_window_days", "policy", "seed")}
        out["embedder"] = self.embedder.to_json()
        out["reader"] = self.reader.to_json()
        out["generator"] = self.generator.to_json()
        return out

    def config_hash(self) -> str:
        blob = json.dumps(self.to_json(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode("utf-8")).hexdigest()[:16]

    def make_embedder(self, transport=None):
        if self.embedder.kind == "builtin":
            return HashingEmbedder(self.embedder.d, self.embedder.seed)
        return ExternalEmbedder(self.embedder.endpoint, transport=transport)


_TOP = {"chunk_size", "overlap", "top_k_chunks", "alpha", "beta", "max_reader_calls", "context_budget",
        "max_chunks_per_patient", "merge_window_days", "policy", "seed"}
_ENDPOINT = {f.name for f in dataclasses.fields(EndpointConfig)}
_GEN = {f.name for f in dataclasses.fields(GeneratorParams)}


def _component(obj: dict, default_kind: str, section: str) -> ComponentConfig:
    obj = dict(obj)
    kind = obj.pop("kind", default_kind)
    d = obj.pop("d", DEFAULT_DIM)
    seed = obj.pop("seed", 0)
    endpoint = None
    if kind == "external":
        # the bearer token itself never lives in the file: only the name of the env var holding it
        for secret in ("token", "api_key", "key"):
            if secret in obj:
                raise ConfigError(f"[{section}] must not contain {secret!r}; set auth_env to an environment variable")
        unknown = set(obj) - _ENDPOINT
        if unknown:
            raise ConfigError(f"[{section}] unknown keys: {sorted(unknown)}")
        if "url" not in obj or "model" not in obj:
            raise ConfigError(f"[{section}] external endpoints need url and model")
        endpoint = EndpointConfig(**obj)
    elif obj:
        raise ConfigError(f"[{section}] unknown keys: {sorted(obj)}")
    return ComponentConfig(kind, int(d), int(seed), endpoint)


def config_from_dict(obj: dict) -> RunConfig:
    obj = dict(obj)
    run = dict(obj.pop("run", {}))
    unknown = set(run) - _TOP
    if unknown:
        raise ConfigError(f"[run] unknown keys: {sorted(unknown)}")
    kwargs = dict(run)
    if "embedder" in obj:
        kwargs["embedder"] = _component(obj.pop("embedder"), "builtin", "embedder")
    if "reader" in obj:
        kwargs["reader"] = _component(obj.pop("reader"), "mock", "reader")
    if "generator" in obj:
        gen = dict(obj.pop("generator"))
        bad = set(gen) - _GEN
        if bad:
            raise ConfigError(f"[generator] unknown keys: {sorted(bad)}")
        for k in ("docs_per_patient", "events_per_patient"):
            if k in gen:
                gen[k] = DistSpec(**gen[k])
        gen.setdefault("seed", run.get("seed", 42))
        kwargs["generator"] = GeneratorParams(**gen)
    elif "seed" in run:
        kwargs["generator"] = GeneratorParams(seed=run["seed"])
    if "paths" in obj:
        kwargs["paths"] = {str(k): str(v) for k, v in obj.pop("paths").items()}
    if obj:
        raise ConfigError(f"unknown sections: {sorted(obj)}")
    try:
        return RunConfig(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


def load_config(path: str | Path | None) -> RunConfig:
    if path is None:
        return RunConfig()
    try:
        with open(path, "rb") as fh:
            obj = tomllib.load(fh)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    except OSError as exc:
        raise ConfigError(f"{path}: {exc.strerror}") from exc
    return config_from_dict(obj)


def with_seed(config: RunConfig, seed: int) -> RunConfig:
    return dataclasses.replace(config, seed=seed, generator=dataclasses.replace(config.generator, seed=seed))
