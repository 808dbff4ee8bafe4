"""Provider-agnostic chat interface with usage accounting.

Two providers ship: a deterministic mock driven by a rule script (the
offline test path) and a minimal OpenAI-style HTTP adapter. Credentials are
read from the environment at construction time, never from config files.
"""

from __future__ import annotations

import json
import os
import threading
import time
from dataclasses import dataclass, field
from typing import Protocol

import requests

from bluemed.errors import CredentialError, ProviderError, TransportError

STAGE_TAGS = ("decompose", "expert_A_r1", "expert_B_r1", "expert_A_r2", "expert_B_r2", "judge")

DEFAULT_TEMPERATURE = 0.2
DEFAULT_MAX_TOKENS = 1024


@dataclass(frozen=True)
class ChatRequest:
    system_prompt: str
    user_content: str
    tag: str
    temperature: float = DEFAULT_TEMPERATURE
    max_tokens: int = DEFAULT_MAX_TOKENS

    def __post_init__(self) -> None:
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0")
        if self.max_tokens < 1:
            raise ValueError("max_tokens must be >= 1")


@dataclass(frozen=True)
class ChatResponse:
    text: str
    input_tokens: int
    output_tokens: int
    provider_id: str


class Provider(Protocol):
    provider_id: str

    def send(self, request: ChatRequest) -> ChatResponse:
        """One delivery attempt; raises TransportError on transient failure."""
        ...


def _estimate_tokens(text: str) -> int:
    # Rough 4-chars-per-token heuristic; only used for mock accounting.
    return max(1, len(text) // 4)


class MockProvider:
    """Scripted provider for offline runs.

    The script is ``{"responses": [...], "defaults": {tag: text}}``. Each
    response rule has a ``tag``, an optional ``contains`` substring matched
    against the user content, the ``response`` text, and an optional
    ``fail_times`` count of simulated transport failures before the rule
    answers (for retry tests). The first matching rule wins; ``defaults``
    answers anything unmatched for its tag.
    """

    provider_id = "mock"

    def __init__(self, script: dict) -> None:
        self.rules = list(script.get("responses", []))
        self.defaults = dict(script.get("defaults", {}))
        self._fail_budget = [int(r.get("fail_times", 0)) for r in self.rules]
        self._lock = threading.Lock()
        self.calls: list[ChatRequest] = []

    @classmethod
    def from_file(cls, path: str) -> "MockProvider":
        with open(path, encoding="utf-8") as fh:
            return cls(json.load(fh))

    def send(self, request: ChatRequest) -> ChatResponse:
        with self._lock:
            self.calls.append(request)
            for i, rule in enumerate(self.rules):
                if rule.get("tag") != request.tag:
                    continue
                needle = rule.get("contains")
                if needle is not None and needle not in request.user_content:
                    continue
                if self._fail_budget[i] > 0:
                    self._fail_budget[i] -= 1
                    raise TransportError(f"scripted transport failure for {request.tag}")
                text = rule["response"]
                break
            else:
                if request.tag not in self.defaults:
                    raise ProviderError(
                        f"mock script has no response for tag {request.tag}", stage=request.tag
                    )
                text = self.defaults[request.tag]
        return ChatResponse(
            text=text,
            input_tokens=_estimate_tokens(request.system_prompt + request.user_content),
            output_tokens=_estimate_tokens(text),
            provider_id=self.provider_id,
        )


class HttpChatProvider:
    """OpenAI-style chat-completions adapter.

    The credential env var is resolved once at startup; a missing variable
    fails construction, not the first call.
    """

    def __init__(
        self,
        endpoint: str,
        model: str,
        api_key_env: str,
        timeout: float = 30.0,
        provider_id: str | None = None,
    ) -> None:
        self.endpoint = endpoint
        self.model = model
        self.timeout = timeout
        self.provider_id = provider_id or model
        key = os.environ.get(api_key_env, "")
        if not key:
            raise CredentialError(f"credential env var {api_key_env} is not set")
        self._headers = {"Authorization": f"Bearer {key}", "Content-Type": "application/json"}

    def send(self, request: ChatRequest) -> ChatResponse:
        messages = []
        if request.system_prompt:
            messages.append({"role": "system", "content": request.system_prompt})
        messages.append({"role": "user", "content": request.user_content})
        payload = {
            "model": self.model,
            "messages": messages,
            "temperature": request.temperature,
            "max_tokens": request.max_tokens,
        }
        try:
            resp = requests.post(self.endpoint, json=payload, headers=self._headers, timeout=self.timeout)
        except (requests.Timeout, requests.ConnectionError) as exc:
            raise TransportError(str(exc)) from exc
        if resp.status_code == 429 or resp.status_code >= 500:
            raise TransportError(f"HTTP {resp.status_code} from {self.endpoint}")
        if resp.status_code != 200:
            raise ProviderError(f"HTTP {resp.status_code}: {resp.text[:200]}", stage=request.tag)
        body = resp.json()
        usage = body.get("usage", {})
        return ChatResponse(
            text=body["choices"][0]["message"]["content"],
            input_tokens=int(usage.get("prompt_tokens", 0)),
            output_tokens=int(usage.get("completion_tokens", 0)),
            provider_id=self.provider_id,
        )


class UsageLedger:
    """Thread-safe per-stage call and token accounting for one run."""

    def __init__(self) -> None:
        self._lock = threading.Lock()
        self.per_stage: dict[str, dict[str, int]] = {}

    def record(self, tag: str, input_tokens: int, output_tokens: int, attempts: int = 1) -> None:
        with self._lock:
            stage = self.per_stage.setdefault(
                tag, {"calls": 0, "attempts": 0, "input_tokens": 0, "output_tokens": 0}
            )
            stage["calls"] += 1
            stage["attempts"] += attempts
            stage["input_tokens"] += input_tokens
            stage["output_tokens"] += output_tokens

    def totals(self) -> dict[str, int]:
        with self._lock:
            out = {"calls": 0, "attempts": 0, "input_tokens": 0, "output_tokens": 0}
            for stage in self.per_stage.values():
                for key in out:
                    out[key] += stage[key]
            return out

    def snapshot(self) -> dict:
        with self._lock:
            per_stage = {tag: dict(v) for tag, v in sorted(self.per_stage.items())}
        return {"per_stage": per_stage, "totals": self.totals()}


def complete(
    request: ChatRequest,
    provider: Provider,
    ledger: UsageLedger | None = None,
    retries: int = 3,
    backoff: float = 0.5,
) -> ChatResponse:
    """Send a chat request, retrying transient transport failures.

    ``retries`` is the total attempt budget. Exhausting it (or any
    non-transport provider failure) raises :class:`ProviderError` tagged
    with the pipeline stage.
    """
    attempts = 0
    last: Exception | None = None
    while attempts < max(retries, 1):
        attempts += 1
        try:
            response = provider.send(request)
        except TransportError as exc:
            last = exc
            if attempts < retries and backoff > 0:
                time.sleep(backoff * (2 ** (attempts - 1)))
            continue
        except ProviderError:
            raise
        except Exception as exc:  # noqa: BLE001 - adapter bugs surface as provider errors
            raise ProviderError(f"provider failure at stage {request.tag}: {exc}", stage=request.tag) from exc
        if ledger is not None:
            ledger.record(request.tag, response.input_tokens, response.output_tokens, attempts)
        return response
    raise ProviderError(
        f"provider failed after {attempts} attempts at stage {request.tag}: {last}", stage=request.tag
    )


@dataclass
class Gateway:
    """Bundle of a provider, retry policy, and a shared usage ledger."""

    provider: Provider
    ledger: UsageLedger = field(default_factory=UsageLedger)
    retries: int = 3
    backoff: float = 0.5

    def complete(self, request: ChatRequest) -> ChatResponse:
        return complete(request, self.provider, self.ledger, self.retries, self.backoff)
