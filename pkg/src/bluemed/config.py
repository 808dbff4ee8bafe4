"""Run configuration loaded from JSON.

Strict by design: unknown keys are rejected at every level so typos fail
loudly, credentials appear only as environment variable NAMES, and a
config survives a load/serialize round trip value-identically.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any

from bluemed.errors import ConfigError
from bluemed.kb.chunking import ChunkingPolicy
from bluemed.retrieval.fusion import FusionConfig

PROVIDER_ROLES = ("expert_a", "expert_b", "judge", "decomposer")


def _check_keys(payload: dict, allowed: set[str], where: str) -> None:
    unknown = sorted(set(payload) - allowed)
    if unknown:
        raise ConfigError(f"{where}: unknown keys {', '.join(unknown)}")


def _from_payload(cls, payload: dict, where: str):
    if not isinstance(payload, dict):
        raise ConfigError(f"{where}: expected an object")
    names = {f.name for f in fields(cls)}
    _check_keys(payload, names, where)
    try:
        return cls(**payload)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{where}: {exc}") from exc


@dataclass(frozen=True)
class ProviderSettings:
    """One chat or embedding backend. ``api_key_env`` names an env var; the
    key itself never appears in config files."""

    kind: str = "mock"  # mock | http
    endpoint: str = ""
    model: str = ""
    api_key_env: str = ""
    timeout: float = 30.0
    retries: int = 3

    def __post_init__(self) -> None:
        if self.kind not in ("mock", "http"):
            raise ConfigError(f"provider kind must be mock or http, got {self.kind!r}")
        if self.kind == "http":
            if not self.endpoint or not self.model:
                raise ConfigError("http provider requires endpoint and model")
            if not self.api_key_env:
                raise ConfigError("http provider requires api_key_env (env var name)")
        if self.retries < 1:
            raise ConfigError("retries must be >= 1")


@dataclass(frozen=True)
class EmbedderSettings:
    kind: str = "mock"  # mock | http
    dim: int = 64
    endpoint: str = ""
    model: str = ""
    api_key_env: str = ""
    timeout: float = 30.0

    def __post_init__(self) -> None:
        if self.kind not in ("mock", "http"):
            raise ConfigError(f"embedder kind must be mock or http, got {self.kind!r}")
        if self.dim < 2:
            raise ConfigError("embedder dim must be >= 2")
        if self.kind == "http" and (not self.endpoint or not self.api_key_env):
            raise ConfigError("http embedder requires endpoint and api_key_env")


@dataclass(frozen=True)
class OnlineSettings:
    enabled: bool = False
    fixture: str = ""  # path to a query->passages JSON mapping; empty = live
    max_pages: int = 2
    mayo_url: str = ""
    webmd_url: str = ""

    def __post_init__(self) -> None:
        if self.max_pages < 1:
            raise ConfigError("online.max_pages must be >= 1")


@dataclass(frozen=True)
class RunConfig:
    kb_root: str = "kb"
    mayo_input: str = ""
    webmd_input: str = ""
    chunking: ChunkingPolicy = field(default_factory=ChunkingPolicy)
    fusion: FusionConfig = field(default_factory=FusionConfig)
    providers: dict[str, ProviderSettings] = field(default_factory=dict)
    embedder: EmbedderSettings = field(default_factory=EmbedderSettings)
    online: OnlineSettings = field(default_factory=OnlineSettings)
    mode: str = "zero-shot"
    exemplar_file: str = ""
    heuristics_file: str = ""
    score_mode: str = "confidence"
    concurrency: int = 4
    out_dir: str = "out"
    runs: int = 2

    def __post_init__(self) -> None:
        if self.mode not in ("zero-shot", "few-shot"):
            raise ConfigError(f"mode must be zero-shot or few-shot, got {self.mode!r}")
        if self.score_mode not in ("confidence", "binary"):
            raise ConfigError(f"score_mode must be confidence or binary, got {self.score_mode!r}")
        if self.concurrency < 1:
            raise ConfigError("concurrency must be >= 1")
        if self.runs < 1:
            raise ConfigError("runs must be >= 1")
        unknown_roles = sorted(set(self.providers) - set(PROVIDER_ROLES))
        if unknown_roles:
            raise ConfigError(f"providers: unknown roles {', '.join(unknown_roles)}")

    def provider_for(self, role: str) -> ProviderSettings:
        if role not in PROVIDER_ROLES:
            raise ConfigError(f"unknown provider role {role}")
        return self.providers.get(role, ProviderSettings())

    @classmethod
    def from_dict(cls, payload: dict) -> "RunConfig":
        if not isinstance(payload, dict):
            raise ConfigError("config root must be a JSON object")
        names = {f.name for f in fields(cls)}
        _check_keys(payload, names, "config")
        data: dict[str, Any] = dict(payload)
        if "chunking" in data:
            data["chunking"] = _from_payload(ChunkingPolicy, data["chunking"], "config.chunking")
        if "fusion" in data:
            data["fusion"] = _from_payload(FusionConfig, data["fusion"], "config.fusion")
        if "providers" in data:
            if not isinstance(data["providers"], dict):
                raise ConfigError("config.providers: expected an object")
            data["providers"] = {
                role: _from_payload(ProviderSettings, settings, f"config.providers.{role}")
                for role, settings in data["providers"].items()
            }
        if "embedder" in data:
            data["embedder"] = _from_payload(EmbedderSettings, data["embedder"], "config.embedder")
        if "online" in data:
            data["online"] = _from_payload(OnlineSettings, data["online"], "config.online")
        try:
            return cls(**data)
        except TypeError as exc:
            raise ConfigError(f"config: {exc}") from exc

    @classmethod
    def load(cls, path: str | Path) -> "RunConfig":
        path = Path(path)
        if not path.is_file():
            raise ConfigError(f"config file not found: {path}")
        try:
            payload = json.loads(path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON: {exc}") from exc
        return cls.from_dict(payload)

    def to_dict(self) -> dict:
        return asdict(self)
