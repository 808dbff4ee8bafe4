"""Embedding backends behind a caching client.

The mock embedder is a hashed bag-of-tokens projection: deterministic,
offline, and similarity tracks token overlap, so retrieval fixtures behave
sensibly without a real model.
"""

from __future__ import annotations

import hashlib
import os
import threading
from typing import Callable, Protocol

import numpy as np
import requests

from bluemed.errors import CredentialError, IndexError_, TransportError
from bluemed.retrieval.sparse import tokenize

MOCK_DIM = 64


class Embedder(Protocol):
    dim: int

    def embed(self, text: str) -> np.ndarray: ...


class MockEmbedder:
    """Deterministic hashed bag-of-tokens embedder.

    Each token hashes to a coordinate and a sign; the summed vector is
    L2-normalized. Token-free text gets a fixed unit basis vector so every
    input embeds to something valid.
    """

    def __init__(self, dim: int = MOCK_DIM) -> None:
        if dim < 2:
            raise ValueError("dim must be >= 2")
        self.dim = dim

    def embed(self, text: str) -> np.ndarray:
        vec = np.zeros(self.dim, dtype=np.float64)
        for token in tokenize(text):
            digest = hashlib.sha256(token.encode("utf-8")).digest()
            index = int.from_bytes(digest[:4], "big") % self.dim
            sign = 1.0 if digest[4] % 2 == 0 else -1.0
            vec[index] += sign
        norm = float(np.linalg.norm(vec))
        if norm == 0.0:
            vec[0] = 1.0
            return vec
        return vec / norm


class HttpEmbedder:
    """OpenAI-style embeddings endpoint adapter."""

    def __init__(
        self,
        endpoint: str,
        model: str,
        api_key_env: str,
        dim: int,
        timeout: float = 30.0,
    ) -> None:
        self.endpoint = endpoint
        self.model = model
        self.dim = dim
        self.timeout = timeout
        key = os.environ.get(api_key_env, "")
        if not key:
            raise CredentialError(f"credential env var {api_key_env} is not set")
        self._headers = {"Authorization": f"Bearer {key}", "Content-Type": "application/json"}

    def embed(self, text: str) -> np.ndarray:
        payload = {"model": self.model, "input": text}
        try:
            resp = requests.post(self.endpoint, json=payload, headers=self._headers, timeout=self.timeout)
        except (requests.Timeout, requests.ConnectionError) as exc:
            raise TransportError(str(exc)) from exc
        if resp.status_code != 200:
            raise TransportError(f"HTTP {resp.status_code} from {self.endpoint}")
        vec = np.asarray(resp.json()["data"][0]["embedding"], dtype=np.float64)
        return vec


class EmbeddingClient:
    """Caching front for an embedder with a dimension guard.

    Identical texts embed once per client; the cache key is the exact text.
    """

    def __init__(self, backend: Embedder) -> None:
        self.backend = backend
        self.dim = backend.dim
        self._cache: dict[str, np.ndarray] = {}
        self._lock = threading.Lock()
        self.backend_calls = 0

    def embed(self, text: str) -> np.ndarray:
        if not text.strip():
            raise IndexError_("cannot embed empty or whitespace-only text")
        with self._lock:
            cached = self._cache.get(text)
        if cached is not None:
            return cached.copy()
        vec = np.asarray(self.backend.embed(text), dtype=np.float64)
        if vec.shape != (self.dim,):
            raise IndexError_(
                f"embedder returned shape {vec.shape}, expected ({self.dim},)"
            )
        with self._lock:
            self.backend_calls += 1
            self._cache[text] = vec
        return vec.copy()

    def as_fn(self) -> Callable[[str], np.ndarray]:
        return self.embed
