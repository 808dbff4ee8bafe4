"""Query-time online retrieval with graceful degradation.

A fetcher returns raw passages for a query; passages are chunked with the
same policy as offline documents and fingerprinted so deduplication spans
offline and online results. Fetch failures never abort retrieval: they
produce an empty result plus a warning.
"""

from __future__ import annotations

import hashlib
import re
from dataclasses import dataclass
from typing import Protocol

import requests

from bluemed.common import Source
from bluemed.errors import IngestError
from bluemed.kb.chunking import ChunkingPolicy, chunk_document, fingerprint
from bluemed.kb.corpus import EvidenceChunk
from bluemed.retrieval.fusion import Method, RankedList


@dataclass(frozen=True)
class Passage:
    text: str
    url: str


class Fetcher(Protocol):
    def fetch(self, query: str, source: Source, max_pages: int) -> list[Passage]:
        """Return passages for a query; may raise on transport failure."""
        ...


class FixtureFetcher:
    """Offline fetcher backed by a query -> passages mapping (tests, demos).

    Mapping values are lists of ``{"text": ..., "url": ...}``. Lookup is by
    exact query string, then by the first mapping key contained in the query.
    """

    def __init__(self, mapping: dict[str, list[dict]]) -> None:
        self.mapping = mapping

    def fetch(self, query: str, source: Source, max_pages: int) -> list[Passage]:
        entries = self.mapping.get(query)
        if entries is None:
            for key in sorted(self.mapping):
                if key in query:
                    entries = self.mapping[key]
                    break
        if entries is None:
            return []
        return [Passage(text=e["text"], url=e["url"]) for e in entries[:max_pages]]


_TAG = re.compile(r"<[^>]+>")


class HttpFetcher:
    """Best-effort live fetcher: GET a per-source search URL, strip tags.

    ``search_urls`` maps a source to a URL template with a ``{query}`` slot.
    This is a coverage supplement, not a crawler; anything beyond a flat GET
    plus tag stripping is out of scope.
    """

    def __init__(
        self,
        search_urls: dict[Source, str],
        timeout: float = 5.0,
        user_agent: str = "bluemed/0.1",
    ) -> None:
        self.search_urls = search_urls
        self.timeout = timeout
        self.user_agent = user_agent

    def fetch(self, query: str, source: Source, max_pages: int) -> list[Passage]:
        template = self.search_urls.get(source)
        if template is None:
            return []
        url = template.format(query=requests.utils.quote(query))
        resp = requests.get(url, timeout=self.timeout, headers={"User-Agent": self.user_agent})
        resp.raise_for_status()
        text = _TAG.sub(" ", resp.text)
        return [Passage(text=text, url=url)][:max_pages]


def passage_chunks(passage: Passage, policy: ChunkingPolicy) -> list[EvidenceChunk]:
    """Chunk one fetched passage into ONLINE evidence chunks.

    Chunk ids hash the origin URL so they are deterministic for a fixed
    fetcher response.
    """
    url_digest = hashlib.sha256(passage.url.encode("utf-8")).hexdigest()[:8]
    chunks = []
    try:
        texts = chunk_document(passage.text, policy)
    except IngestError:
        return []
    for i, text in enumerate(texts):
        chunks.append(
            EvidenceChunk(
                chunk_id=f"online:{url_digest}#{i:04d}",
                text=text,
                source=Source.ONLINE,
                category=(),
                origin_doc=passage.url,
                fingerprint=fingerprint(text),
            )
        )
    return chunks


def online_search(
    query: str,
    source: Source,
    top_k: int,
    fetcher: Fetcher,
    policy: ChunkingPolicy,
    max_pages: int,
    registry: dict[str, EvidenceChunk],
    warnings: list[str],
) -> RankedList:
    """Fetch, chunk, and rank online passages for one query.

    New chunks are recorded in ``registry`` so later stages can resolve their
    ids. Any fetcher failure degrades to an empty result with a warning
    appended to ``warnings``.
    """
    try:
        passages = fetcher.fetch(query, source, max_pages)
    except Exception as exc:  # noqa: BLE001 - degradation contract: never abort
        warnings.append(f"online fetch failed for {source.value}: {exc}")
        return RankedList(method=Method.ONLINE, entries=[])

    entries: list[tuple[str, float]] = []
    for passage in passages:
        for chunk in passage_chunks(passage, policy):
            if len(entries) >= top_k:
                break
            if chunk.chunk_id in registry:
                continue
            registry[chunk.chunk_id] = chunk
            # Synthetic score preserving fetch order; only the rank matters downstream.
            entries.append((chunk.chunk_id, 1.0 / (len(entries) + 1)))
    return RankedList(method=Method.ONLINE, entries=entries)
