"""Source-labeled chunk collections and their on-disk store.

Layout, one directory per collection under the knowledge-base root:

    kb/<collection>/manifest.json   name, source, chunking policy, counts
    kb/<collection>/chunks.jsonl    one chunk record per line

Collections are immutable once written; ingestion of identical inputs is
byte-identical so rebuilt stores can be diffed.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from bluemed.common import Source, normalize_whitespace
from bluemed.errors import IngestError
from bluemed.kb.chunking import ChunkingPolicy, chunk_document, fingerprint

SCHEMA_VERSION = 1


@dataclass(frozen=True)
class EvidenceChunk:
    """One indexed document fragment."""

    chunk_id: str
    text: str
    source: Source
    category: tuple[str, ...]
    origin_doc: str
    fingerprint: str

    def __post_init__(self) -> None:
        if not self.text:
            raise ValueError("chunk text must be non-empty")

    def to_record(self) -> dict:
        return {
            "chunk_id": self.chunk_id,
            "text": self.text,
            "source": self.source.value,
            "category": list(self.category),
            "origin_doc": self.origin_doc,
            "fingerprint": self.fingerprint,
        }

    @classmethod
    def from_record(cls, rec: dict) -> "EvidenceChunk":
        return cls(
            chunk_id=rec["chunk_id"],
            text=rec["text"],
            source=Source(rec["source"]),
            category=tuple(rec["category"]),
            origin_doc=rec["origin_doc"],
            fingerprint=rec["fingerprint"],
        )


@dataclass
class Collection:
    """Ordered chunk list sharing one source label."""

    name: str
    source: Source
    policy: ChunkingPolicy
    chunks: list[EvidenceChunk] = field(default_factory=list)

    def __post_init__(self) -> None:
        seen: set[str] = set()
        for c in self.chunks:
            if c.source is not self.source:
                raise IngestError(
                    f"chunk {c.chunk_id} has source {c.source.value}, "
                    f"collection {self.name} is {self.source.value}"
                )
            if c.chunk_id in seen:
                raise IngestError(f"duplicate chunk_id {c.chunk_id} in {self.name}")
            seen.add(c.chunk_id)

    def __len__(self) -> int:
        return len(self.chunks)

    @property
    def stats(self) -> dict:
        token_estimate = sum(len(c.text.split()) for c in self.chunks)
        return {"chunk_count": len(self.chunks), "token_estimate": token_estimate}

    def by_id(self) -> dict[str, EvidenceChunk]:
        return {c.chunk_id: c for c in self.chunks}


def _read_category_map(input_dir: Path) -> dict[str, list[str]] | None:
    """Optional sidecar ``categories.json``: document name -> tag list."""
    sidecar = input_dir / "categories.json"
    if not sidecar.exists():
        return None
    mapping = json.loads(sidecar.read_text(encoding="utf-8"))
    if not isinstance(mapping, dict):
        raise IngestError(f"{sidecar}: category map must be a JSON object")
    return {k: list(v) for k, v in mapping.items()}


def _categories_for(doc_path: Path, input_dir: Path, sidecar: dict[str, list[str]] | None) -> tuple[str, ...]:
    rel = doc_path.relative_to(input_dir)
    if sidecar is not None:
        return tuple(sorted(sidecar.get(rel.as_posix(), sidecar.get(doc_path.stem, []))))
    # Directory convention: a doc under <input>/<tag>/ carries that tag.
    if len(rel.parts) > 1:
        return (rel.parts[0],)
    return ()


def ingest_collection(
    input_path: str | Path,
    source: Source,
    policy: ChunkingPolicy,
    name: str | None = None,
    on_unreadable: str = "abort",
) -> Collection:
    """Chunk every document under ``input_path`` into a new Collection.

    Documents are ``*.txt`` files, read as UTF-8, sorted by relative path so
    the result is deterministic. ``on_unreadable`` is ``abort`` (default) or
    ``skip``; skipped files are reported via the raised/returned path list.
    """
    input_dir = Path(input_path)
    if not input_dir.is_dir():
        raise IngestError(f"input directory does not exist: {input_dir}")
    if source is Source.ONLINE:
        raise IngestError("ONLINE is reserved for live-fetched content")

    doc_paths = sorted(input_dir.rglob("*.txt"), key=lambda p: p.relative_to(input_dir).as_posix())
    if not doc_paths:
        raise IngestError(f"no readable documents under {input_dir}")

    sidecar = _read_category_map(input_dir)
    chunks: list[EvidenceChunk] = []
    seen_docs: set[str] = set()
    for doc_path in doc_paths:
        origin = doc_path.relative_to(input_dir).as_posix()
        if origin in seen_docs:
            raise IngestError(f"duplicate document id {origin}")
        seen_docs.add(origin)
        try:
            raw = doc_path.read_text(encoding="utf-8")
        except (OSError, UnicodeDecodeError) as exc:
            if on_unreadable == "skip":
                continue
            raise IngestError(f"unreadable file {doc_path}: {exc}") from exc
        categories = _categories_for(doc_path, input_dir, sidecar)
        for i, text in enumerate(chunk_document(raw, policy)):
            chunks.append(
                EvidenceChunk(
                    chunk_id=f"{origin}#{i:04d}",
                    text=text,
                    source=source,
                    category=categories,
                    origin_doc=origin,
                    fingerprint=fingerprint(text),
                )
            )

    return Collection(name=name or source.value.lower(), source=source, policy=policy, chunks=chunks)


def save_collection(collection: Collection, kb_root: str | Path) -> Path:
    """Persist a collection under ``kb_root/<name>/``. Deterministic bytes."""
    out = Path(kb_root) / collection.name
    out.mkdir(parents=True, exist_ok=True)
    manifest = {
        "schema_version": SCHEMA_VERSION,
        "name": collection.name,
        "source": collection.source.value,
        "policy": {"chunk_size": collection.policy.chunk_size, "overlap": collection.policy.overlap},
        "stats": collection.stats,
    }
    (out / "manifest.json").write_text(
        json.dumps(manifest, indent=2, sort_keys=True, ensure_ascii=True) + "\n", encoding="utf-8"
    )
    with (out / "chunks.jsonl").open("w", encoding="utf-8") as fh:
        for chunk in collection.chunks:
            fh.write(json.dumps(chunk.to_record(), sort_keys=True, ensure_ascii=True) + "\n")
    return out


def load_collection(kb_root: str | Path, name: str) -> Collection:
    """Load a persisted collection; raises :class:`IngestError` if absent."""
    base = Path(kb_root) / name
    manifest_path = base / "manifest.json"
    if not manifest_path.exists():
        raise IngestError(f"collection not found: {base}")
    manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
    if manifest.get("schema_version") != SCHEMA_VERSION:
        raise IngestError(
            f"unsupported kb schema version {manifest.get('schema_version')} in {manifest_path}"
        )
    policy = ChunkingPolicy(**manifest["policy"])
    chunks = []
    with (base / "chunks.jsonl").open(encoding="utf-8") as fh:
        for line in fh:
            chunks.append(EvidenceChunk.from_record(json.loads(line)))
    return Collection(name=manifest["name"], source=Source(manifest["source"]), policy=policy, chunks=chunks)


def reconstruct_document(collection: Collection, origin_doc: str) -> str:
    """Rebuild a normalized source document from its chunks (overlap removed).

    Used by tests to check the coverage invariant; also handy for audits.
    """
    doc_chunks = [c for c in collection.chunks if c.origin_doc == origin_doc]
    if not doc_chunks:
        raise IngestError(f"no chunks for document {origin_doc}")
    stride = collection.policy.stride
    parts: list[str] = []
    prev_end = 0
    for i, chunk in enumerate(doc_chunks):
        start = i * stride
        parts.append(chunk.text[max(prev_end - start, 0):])
        prev_end = start + len(chunk.text)
    text = "".join(parts)
    # Chunks were cut from normalized text, so this must already be normalized.
    assert text == normalize_whitespace(text)
    return text
