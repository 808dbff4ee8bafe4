"""Corpus ingestion, persistence round trip, and document reconstruction."""

import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bluemed.common import Source, normalize_whitespace
from bluemed.errors import IngestError
from bluemed.kb.chunking import ChunkingPolicy
from bluemed.kb.corpus import (
    Collection,
    EvidenceChunk,
    ingest_collection,
    load_collection,
    reconstruct_document,
    save_collection,
)
from tests.conftest import make_chunk


def write_docs(root, docs: dict[str, str]):
    for name, text in docs.items():
        path = root / name
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text, encoding="utf-8")


def test_ingest_orders_documents_and_numbers_chunks(tmp_path):
    write_docs(tmp_path, {"b.txt": "second doc", "a.txt": "first doc", "notes.md": "ignored"})
    col = ingest_collection(tmp_path, Source.MAYO, ChunkingPolicy(), name="mayo")
    assert [c.chunk_id for c in col.chunks] == ["a.txt#0000", "b.txt#0000"]
    assert all(c.source is Source.MAYO for c in col.chunks)
    assert col.chunks[0].origin_doc == "a.txt"


def test_ingest_multi_chunk_ids(tmp_path):
    write_docs(tmp_path, {"long.txt": "x" * 2500})
    col = ingest_collection(tmp_path, Source.WEBMD, ChunkingPolicy(), name="webmd")
    assert [c.chunk_id for c in col.chunks] == [f"long.txt#{i:04d}" for i in range(4)]


def test_ingest_rejects_missing_dir(tmp_path):
    with pytest.raises(IngestError):
        ingest_collection(tmp_path / "nope", Source.MAYO, ChunkingPolicy())


def test_ingest_rejects_empty_dir(tmp_path):
    with pytest.raises(IngestError):
        ingest_collection(tmp_path, Source.MAYO, ChunkingPolicy())


def test_ingest_rejects_online_source(tmp_path):
    write_docs(tmp_path, {"a.txt": "text"})
    with pytest.raises(IngestError):
        ingest_collection(tmp_path, Source.ONLINE, ChunkingPolicy())


def test_subdirectory_becomes_category(tmp_path):
    write_docs(tmp_path, {"cardio/flutter.txt": "sawtooth content", "plain.txt": "flat"})
    col = ingest_collection(tmp_path, Source.MAYO, ChunkingPolicy())
    by_origin = {c.origin_doc: c for c in col.chunks}
    assert by_origin["cardio/flutter.txt"].category == ("cardio",)
    assert by_origin["plain.txt"].category == ()


def test_categories_sidecar_wins(tmp_path):
    write_docs(tmp_path, {"a.txt": "alpha"})
    (tmp_path / "categories.json").write_text(json.dumps({"a.txt": ["drugs", "adult"]}))
    col = ingest_collection(tmp_path, Source.MAYO, ChunkingPolicy())
    assert col.chunks[0].category == ("adult", "drugs")


def test_collection_rejects_wrong_source_and_duplicates():
    good = make_chunk("a#0000", "text one", Source.MAYO)
    bad_source = make_chunk("b#0000", "text two", Source.WEBMD)
    with pytest.raises(IngestError):
        Collection(name="mayo", source=Source.MAYO, policy=ChunkingPolicy(), chunks=[good, bad_source])
    with pytest.raises(IngestError):
        Collection(name="mayo", source=Source.MAYO, policy=ChunkingPolicy(), chunks=[good, good])


def test_save_load_round_trip(tmp_path):
    write_docs(tmp_path / "src", {"doc.txt": "word " * 600})
    col = ingest_collection(tmp_path / "src", Source.MAYO, ChunkingPolicy(), name="mayo")
    out = save_collection(col, tmp_path / "kb")
    assert (out / "manifest.json").exists() and (out / "chunks.jsonl").exists()

    loaded = load_collection(tmp_path / "kb", "mayo")
    assert loaded.name == col.name
    assert loaded.source is col.source
    assert loaded.policy == col.policy
    assert loaded.chunks == col.chunks


def test_save_is_deterministic(tmp_path):
    write_docs(tmp_path / "src", {"doc.txt": "alpha beta gamma"})
    col = ingest_collection(tmp_path / "src", Source.MAYO, ChunkingPolicy(), name="mayo")
    save_collection(col, tmp_path / "kb1")
    save_collection(col, tmp_path / "kb2")
    for fname in ("manifest.json", "chunks.jsonl"):
        assert (tmp_path / "kb1" / "mayo" / fname).read_bytes() == (
            tmp_path / "kb2" / "mayo" / fname
        ).read_bytes()


def test_load_missing_collection(tmp_path):
    with pytest.raises(IngestError):
        load_collection(tmp_path, "mayo")


def test_load_rejects_future_schema(tmp_path):
    write_docs(tmp_path / "src", {"doc.txt": "text"})
    col = ingest_collection(tmp_path / "src", Source.MAYO, ChunkingPolicy(), name="mayo")
    out = save_collection(col, tmp_path / "kb")
    manifest = json.loads((out / "manifest.json").read_text())
    manifest["schema_version"] = 99
    (out / "manifest.json").write_text(json.dumps(manifest))
    with pytest.raises(IngestError, match="99"):
        load_collection(tmp_path / "kb", "mayo")


def test_chunk_requires_text():
    with pytest.raises(ValueError):
        EvidenceChunk(
            chunk_id="x#0000", text="", source=Source.MAYO,
            category=(), origin_doc="x.txt", fingerprint="0" * 16,
        )


@settings(max_examples=50, deadline=None)
@given(
    body=st.text(alphabet="abcdefgh \n", min_size=1, max_size=4000).filter(lambda t: t.strip()),
    chunk_size=st.integers(min_value=50, max_value=600),
    data=st.data(),
)
def test_reconstruction_inverts_chunking(tmp_path_factory, body, chunk_size, data):
    overlap = data.draw(st.integers(min_value=0, max_value=chunk_size - 1))
    root = tmp_path_factory.mktemp("docs")
    write_docs(root, {"doc.txt": body})
    policy = ChunkingPolicy(chunk_size=chunk_size, overlap=overlap)
    col = ingest_collection(root, Source.MAYO, policy)
    assert reconstruct_document(col, "doc.txt") == normalize_whitespace(body)


def test_reconstruct_unknown_doc(collections):
    with pytest.raises(IngestError):
        reconstruct_document(collections[Source.MAYO], "missing.txt")


def test_fixture_corpus_shape(collections):
    mayo, webmd = collections[Source.MAYO], collections[Source.WEBMD]
    assert len(mayo) >= 6 and len(webmd) >= 6
    # arrhythmia.txt is long enough to split, proving multi-chunk ingestion.
    arr = [c for c in mayo.chunks if c.origin_doc == "arrhythmia.txt"]
    assert len(arr) > 1
