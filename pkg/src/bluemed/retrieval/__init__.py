"""Hybrid retrieval: dense, sparse and online search fused with RRF."""

from bluemed.retrieval.dense import DenseIndex
from bluemed.retrieval.engine import (
    CROSS_SOURCE_TOP_K,
    RetrievalEngine,
    RetrievalOutcome,
    ScoredChunk,
    SourceIndexes,
    SubQuery,
)
from bluemed.retrieval.fusion import FusedResult, FusionConfig, Method, RankedList, dedup, fuse_rrf
from bluemed.retrieval.online import Fetcher, FixtureFetcher, HttpFetcher, Passage
from bluemed.retrieval.sparse import SparseIndex, tokenize

__all__ = [
    "CROSS_SOURCE_TOP_K",
    "DenseIndex",
    "Fetcher",
    "FixtureFetcher",
    "FusedResult",
    "FusionConfig",
    "HttpFetcher",
    "Method",
    "Passage",
    "RankedList",
    "RetrievalEngine",
    "RetrievalOutcome",
    "ScoredChunk",
    "SourceIndexes",
    "SparseIndex",
    "SubQuery",
    "dedup",
    "fuse_rrf",
    "tokenize",
]
