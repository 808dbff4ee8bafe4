"""Versioned JSON export of a finished debate.

One file per note. Serialization is deterministic (sorted keys, fixed
indent, ASCII, trailing newline, no timestamps) so repeated mock runs are
byte-identical and goldens can pin exact bytes.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Sequence

from bluemed.debate.orchestrator import DebateState
from bluemed.errors import TranscriptError
from bluemed.kb.chunking import fingerprint
from bluemed.retrieval.engine import ScoredChunk

TRANSCRIPT_SCHEMA_VERSION = 1


def evidence_records(evidence: Sequence[ScoredChunk]) -> list[dict]:
    return [
        {
            "chunk_id": scored.chunk.chunk_id,
            "rrf_score": scored.rrf_score,
            "methods": {m.value: rank for m, rank in sorted(scored.contributing_methods.items())},
        }
        for scored in evidence
    ]


def state_to_record(state: DebateState, usage: dict | None = None) -> dict:
    if state.round1 is None or state.verdict is None:
        raise TranscriptError("transcript export requires a completed debate")
    record = {
        "schema_version": TRANSCRIPT_SCHEMA_VERSION,
        "note_id": state.note_id,
        "note_fingerprint": fingerprint(state.note),
        "sub_queries": [{"text": sq.text, "aspect": sq.aspect} for sq in state.sub_queries],
        "evidence": {
            "A": evidence_records(state.evidence_a),
            "B": evidence_records(state.evidence_b),
        },
        "arguments": [arg.to_record() for arg in state.all_arguments()],
        "consensus": state.consensus.to_record() if state.consensus else None,
        "cross_evidence": {
            source.value: [scored.chunk.chunk_id for scored in chunks]
            for source, chunks in sorted(state.cross_evidence.items())
        },
        "verdict": state.verdict.to_record(),
        "warnings": list(state.warnings),
    }
    if usage is not None:
        record["usage"] = usage
    return record


def dumps_record(record: dict) -> str:
    return json.dumps(record, sort_keys=True, ensure_ascii=True, indent=2) + "\n"


def export_transcript(state: DebateState, path: str | Path, usage: dict | None = None) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dumps_record(state_to_record(state, usage)), encoding="utf-8")
    return path


def load_transcript(path: str | Path) -> dict:
    path = Path(path)
    try:
        record = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise TranscriptError(f"cannot load transcript {path}: {exc}") from exc
    if record.get("schema_version") != TRANSCRIPT_SCHEMA_VERSION:
        raise TranscriptError(
            f"unsupported transcript schema_version {record.get('schema_version')!r}"
        )
    return record
