"""Fixed-size document chunking and content fingerprinting.

Documents are whitespace-normalized before chunking, so chunk offsets are
positions in the normalized text. Chunks start every ``chunk_size - overlap``
characters; every chunk except possibly the last has exactly ``chunk_size``
characters, and consecutive chunks share ``overlap`` characters.

The content fingerprint is a digest of the first 200 normalized characters.
It backs retrieval-time deduplication: two chunks that agree on that prefix
are treated as the same content regardless of how they end.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

from bluemed.common import normalize_whitespace
from bluemed.errors import IngestError

FINGERPRINT_PREFIX_LEN = 200


@dataclass(frozen=True)
class ChunkingPolicy:
    """Character-count chunking parameters."""

    chunk_size: int = 1000
    overlap: int = 200

    def __post_init__(self) -> None:
        if self.chunk_size <= 0:
            raise ValueError(f"chunk_size must be positive, got {self.chunk_size}")
        if not 0 <= self.overlap < self.chunk_size:
            raise ValueError(
                f"overlap must satisfy 0 <= overlap < chunk_size, "
                f"got overlap={self.overlap}, chunk_size={self.chunk_size}"
            )

    @property
    def stride(self) -> int:
        return self.chunk_size - self.overlap


def fingerprint(text: str) -> str:
    """Digest of the whitespace-normalized first 200 characters of ``text``.

    Texts sharing that normalized prefix map to the same fingerprint.
    """
    if not text:
        raise ValueError("fingerprint requires non-empty text")
    prefix = normalize_whitespace(text)[:FINGERPRINT_PREFIX_LEN]
    return hashlib.sha256(prefix.encode("utf-8")).hexdigest()[:16]


def chunk_spans(length: int, policy: ChunkingPolicy) -> list[tuple[int, int]]:
    """(start, end) spans for a normalized document of ``length`` characters.

    Starts are successive multiples of the stride while they fall inside the
    document; the final span may be shorter than ``chunk_size``.
    """
    spans = []
    start = 0
    while start < length:
        spans.append((start, min(start + policy.chunk_size, length)))
        start += policy.stride
    return spans


def chunk_document(doc: str, policy: ChunkingPolicy) -> list[str]:
    """Split ``doc`` into overlapping fixed-size chunk texts.

    Raises :class:`IngestError` if the document is empty after whitespace
    normalization.
    """
    normalized = normalize_whitespace(doc)
    if not normalized:
        raise IngestError("document is empty after whitespace normalization")
    return [normalized[a:b] for a, b in chunk_spans(len(normalized), policy)]
