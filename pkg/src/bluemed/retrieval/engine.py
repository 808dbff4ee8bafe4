"""Retrieval orchestration: per-expert partitioned search and the judge's
cross-source pass.

Experts are hard-partitioned: A searches only the MAYO collection, B only
WEBMD, so the two debaters argue from evidence with different editorial
origins. Per sub-query, dense and sparse (and optionally online) results are
fused with RRF; across sub-queries each chunk keeps its best fused score;
the deduplicated top ``top_k_per_expert`` survive.

The judge's cross-source pass searches both collections (dense and sparse
only, never online) with a single query combining the note and both experts'
claimed terms.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass, field
from typing import Callable

from bluemed.common import EXPERT_SOURCE, Expert, Source
from bluemed.errors import IndexError_
from bluemed.kb.chunking import ChunkingPolicy
from bluemed.kb.corpus import Collection, EvidenceChunk
from bluemed.retrieval.dense import DenseIndex
from bluemed.retrieval.fusion import FusedResult, FusionConfig, Method, RankedList, dedup, fuse_rrf
from bluemed.retrieval.online import Fetcher, online_search
from bluemed.retrieval.sparse import SparseIndex

CROSS_SOURCE_TOP_K = 5


@dataclass(frozen=True)
class SubQuery:
    """One focused retrieval query targeting a clinical aspect of the note."""

    text: str
    aspect: str = "general"

    def __post_init__(self) -> None:
        if not self.text.strip():
            raise ValueError("sub-query text must be non-empty")


@dataclass
class ScoredChunk:
    """Evidence chunk plus its fused score, as handed to the agents."""

    chunk: EvidenceChunk
    rrf_score: float
    contributing_methods: dict[Method, int] = field(default_factory=dict)


@dataclass
class RetrievalOutcome:
    evidence: list[ScoredChunk]
    warnings: list[str] = field(default_factory=list)


class SourceIndexes:
    """Dense + sparse indexes over one collection."""

    def __init__(self, collection: Collection, dense: DenseIndex, sparse: SparseIndex) -> None:
        self.collection = collection
        self.dense = dense
        self.sparse = sparse
        self.chunks_by_id = collection.by_id()


class RetrievalEngine:
    """Holds per-source indexes and runs the partitioned retrieval flows.

    Indexes are immutable after construction; all search entry points are
    safe for concurrent readers. ``counters`` tracks method invocations for
    instrumentation (no-re-retrieval and no-online contracts are asserted
    against it in tests).
    """

    def __init__(
        self,
        indexes: dict[Source, SourceIndexes],
        embed: Callable[[str], "object"],
        config: FusionConfig,
        fetcher: Fetcher | None = None,
        online_enabled: bool = False,
        online_policy: ChunkingPolicy | None = None,
        online_max_pages: int = 2,
    ) -> None:
        for src in (Source.MAYO, Source.WEBMD):
            if src not in indexes:
                raise IndexError_(f"missing indexes for {src.value}")
        self.indexes = indexes
        self.embed = embed
        self.config = config
        self.fetcher = fetcher
        self.online_enabled = online_enabled and fetcher is not None
        self.online_policy = online_policy or ChunkingPolicy()
        self.online_max_pages = online_max_pages
        self.counters: dict[str, int] = {"dense": 0, "sparse": 0, "online_fetch": 0}
        self._lock = threading.Lock()

    @classmethod
    def build(
        cls,
        collections: dict[Source, Collection],
        embed: Callable[[str], "object"],
        config: FusionConfig,
        bm25_k1: float = 1.5,
        bm25_b: float = 0.75,
        dense_indexes: dict[Source, DenseIndex] | None = None,
        **kwargs,
    ) -> "RetrievalEngine":
        """Construct indexes for each collection, reusing prebuilt dense
        indexes (persisted embeddings) when supplied."""
        indexes = {}
        for src, col in collections.items():
            dense = (dense_indexes or {}).get(src) or DenseIndex.build(col, embed)
            sparse = SparseIndex.build(col, k1=bm25_k1, b=bm25_b)
            indexes[src] = SourceIndexes(col, dense, sparse)
        return cls(indexes, embed, config, **kwargs)

    def _count(self, key: str) -> None:
        with self._lock:
            self.counters[key] += 1

    # -- single-method searches -------------------------------------------

    def dense_search(self, query_embedding, source: Source, top_k: int) -> RankedList:
        self._count("dense")
        return self.indexes[source].dense.search(query_embedding, top_k)

    def sparse_search(self, query: str, source: Source, top_k: int) -> RankedList:
        self._count("sparse")
        return self.indexes[source].sparse.search(query, top_k)

    def online_search(
        self,
        query: str,
        source: Source,
        top_k: int,
        registry: dict[str, EvidenceChunk],
        warnings: list[str],
    ) -> RankedList:
        self._count("online_fetch")
        assert self.fetcher is not None
        return online_search(
            query, source, top_k, self.fetcher, self.online_policy,
            self.online_max_pages, registry, warnings,
        )

    # -- fused flows ------------------------------------------------------

    def _fuse_for_query(
        self,
        query: str,
        source: Source,
        include_online: bool,
        registry: dict[str, EvidenceChunk],
        warnings: list[str],
    ) -> list[FusedResult]:
        pool = self.config.candidates_per_method
        lists = [
            self.dense_search(self.embed(query), source, pool),
            self.sparse_search(query, source, pool),
        ]
        if include_online:
            lists.append(self.online_search(query, source, pool, registry, warnings))
        return fuse_rrf(lists, self.config)

    def _resolve(self, chunk_id: str, source: Source, registry: dict[str, EvidenceChunk]) -> EvidenceChunk:
        chunk = self.indexes[source].chunks_by_id.get(chunk_id) or registry.get(chunk_id)
        if chunk is None:
            raise IndexError_(f"unresolvable chunk_id {chunk_id}")
        return chunk

    def retrieve_for_expert(self, sub_queries: list[SubQuery], expert: Expert) -> RetrievalOutcome:
        """Partitioned hybrid retrieval for one expert over all sub-queries.

        Per sub-query fusion, then a max-score merge across sub-queries (a
        chunk relevant to any clinical aspect keeps its best score), then
        fingerprint dedup, then the per-expert top-k cut.
        """
        if not sub_queries:
            raise ValueError("sub_queries must be non-empty")
        source = EXPERT_SOURCE[expert]
        registry: dict[str, EvidenceChunk] = {}
        warnings: list[str] = []

        best: dict[str, FusedResult] = {}
        for sq in sub_queries:
            for res in self._fuse_for_query(sq.text, source, self.online_enabled, registry, warnings):
                cur = best.get(res.chunk_id)
                if cur is None or res.rrf_score > cur.rrf_score:
                    best[res.chunk_id] = res
        merged = sorted(best.values(), key=lambda r: (-r.rrf_score, r.chunk_id))

        deduped = dedup(merged, lambda cid: self._resolve(cid, source, registry).fingerprint)
        top = deduped[: self.config.top_k_per_expert]
        evidence = [
            ScoredChunk(
                chunk=self._resolve(r.chunk_id, source, registry),
                rrf_score=r.rrf_score,
                contributing_methods=r.contributing_methods,
            )
            for r in top
        ]
        if not evidence:
            warnings.append(f"no evidence retrieved for expert {expert.value}")
        return RetrievalOutcome(evidence=evidence, warnings=warnings)

    def cross_source_retrieve(self, note: str, claims: list[str]) -> dict[Source, list[ScoredChunk]]:
        """Judge-stage verification retrieval from BOTH collections.

        One combined query (note + both experts' claimed terms), dense and
        sparse only; online search is excluded here by design. At most
        ``CROSS_SOURCE_TOP_K`` deduplicated chunks per source.
        """
        query = " ".join([note] + [c for c in claims if c])
        out: dict[Source, list[ScoredChunk]] = {}
        for source in (Source.MAYO, Source.WEBMD):
            fused = self._fuse_for_query(query, source, include_online=False, registry={}, warnings=[])
            deduped = dedup(fused, lambda cid: self._resolve(cid, source, {}).fingerprint)
            out[source] = [
                ScoredChunk(
                    chunk=self._resolve(r.chunk_id, source, {}),
                    rrf_score=r.rrf_score,
                    contributing_methods=r.contributing_methods,
                )
                for r in deduped[:CROSS_SOURCE_TOP_K]
            ]
        return out
