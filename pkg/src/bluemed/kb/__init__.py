"""Knowledge-base construction: chunking, fingerprints, persisted collections."""

from bluemed.kb.chunking import ChunkingPolicy, chunk_document, chunk_spans, fingerprint
from bluemed.kb.corpus import (
    Collection,
    EvidenceChunk,
    ingest_collection,
    load_collection,
    reconstruct_document,
    save_collection,
)

__all__ = [
    "ChunkingPolicy",
    "Collection",
    "EvidenceChunk",
    "chunk_document",
    "chunk_spans",
    "fingerprint",
    "ingest_collection",
    "load_collection",
    "reconstruct_document",
    "save_collection",
]
