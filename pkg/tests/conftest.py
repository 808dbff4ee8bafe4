"""Shared fixtures: the 6-note corpus, a prebuilt retrieval engine, and
mock-backed gateways."""

from __future__ import annotations

from pathlib import Path

import pytest

from bluemed.common import Expert, Label, Source
from bluemed.debate.orchestrator import Gateways
from bluemed.kb.chunking import ChunkingPolicy, fingerprint
from bluemed.kb.corpus import EvidenceChunk, ingest_collection
from bluemed.llm.embeddings import EmbeddingClient, MockEmbedder
from bluemed.llm.provider import MockProvider
from bluemed.retrieval.dense import DenseIndex
from bluemed.retrieval.engine import RetrievalEngine
from bluemed.retrieval.fusion import FusionConfig

REPO = Path(__file__).resolve().parent.parent
FIXTURES = REPO / "fixtures"


@pytest.fixture(scope="session")
def fixtures_dir() -> Path:
    return FIXTURES


@pytest.fixture(scope="session")
def collections():
    policy = ChunkingPolicy()
    return {
        Source.MAYO: ingest_collection(FIXTURES / "kb_src" / "mayo", Source.MAYO, policy, name="mayo"),
        Source.WEBMD: ingest_collection(FIXTURES / "kb_src" / "webmd", Source.WEBMD, policy, name="webmd"),
    }


@pytest.fixture(scope="session")
def embed_fn():
    return EmbeddingClient(MockEmbedder(64)).as_fn()


@pytest.fixture(scope="session")
def engine(collections, embed_fn) -> RetrievalEngine:
    return RetrievalEngine.build(collections, embed_fn, FusionConfig())


@pytest.fixture()
def fresh_engine(collections, embed_fn):
    """Engine with clean instrumentation counters (built per test)."""

    def build(**kwargs) -> RetrievalEngine:
        return RetrievalEngine.build(collections, embed_fn, FusionConfig(), **kwargs)

    return build


@pytest.fixture()
def mock_provider() -> MockProvider:
    return MockProvider.from_file(str(FIXTURES / "mock_script.json"))


@pytest.fixture()
def gateways(mock_provider) -> Gateways:
    return Gateways.single(mock_provider, retries=3, backoff=0.0)


@pytest.fixture(scope="session")
def fixture_notes() -> dict[str, str]:
    import csv

    with (FIXTURES / "dataset.csv").open(newline="", encoding="utf-8") as fh:
        return {row["id"]: row["text"] for row in csv.DictReader(fh)}


def make_chunk(chunk_id: str, text: str, source: Source = Source.MAYO) -> EvidenceChunk:
    return EvidenceChunk(
        chunk_id=chunk_id,
        text=text,
        source=source,
        category=(),
        origin_doc="synthetic.txt",
        fingerprint=fingerprint(text),
    )


__all__ = ["Expert", "Label", "make_chunk"]
