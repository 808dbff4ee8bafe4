"""LLM-backed note decomposition into focused retrieval queries."""

from __future__ import annotations

import re

from bluemed.llm.prompts import Mode, TemplateId, render_prompt
from bluemed.llm.provider import ChatRequest, Gateway
from bluemed.retrieval.engine import SubQuery

MIN_QUERIES = 3
MAX_QUERIES = 5

_MARKER_RE = re.compile(r"^\s*(?:\d+\s*[.)]\s*|[-*•]\s+)(.*\S)\s*$")
_ASPECT_RE = re.compile(r"^([A-Za-z][A-Za-z _/-]{0,30}):\s+(\S.*)$")
# Lines longer than this are treated as prose, not a query list.
_MAX_QUERY_LINE = 300


def _to_subquery(body: str) -> SubQuery:
    m = _ASPECT_RE.match(body)
    if m:
        return SubQuery(text=m.group(2).strip(), aspect=m.group(1).strip().lower())
    return SubQuery(text=body.strip())


def parse_subqueries(response_text: str) -> list[SubQuery]:
    """Extract sub-queries from list-formatted model output.

    Numbered or bulleted lines are preferred; failing that, any short
    multi-line output is read one query per line. Prose yields nothing and
    the caller falls back to the whole note.
    """
    lines = [line for line in response_text.splitlines() if line.strip()]
    marked = []
    for line in lines:
        m = _MARKER_RE.match(line)
        if m:
            marked.append(m.group(1))
    if marked:
        return [_to_subquery(body) for body in marked]
    if len(lines) >= 2 and all(len(line) <= _MAX_QUERY_LINE for line in lines):
        return [_to_subquery(line.strip()) for line in lines]
    return []


def decompose_note(note: str, gateway: Gateway) -> tuple[list[SubQuery], list[str]]:
    """Split a note into 3 to 5 sub-queries; never returns an empty list.

    Under-length output is padded with the whole note as one fallback
    query; over-length output is truncated to five. Either adjustment is
    reported as a warning alongside the result.
    """
    if not note.strip():
        raise ValueError("note must be non-empty")
    rendered = render_prompt(TemplateId.DECOMPOSE, {"note": note}, mode=Mode.ZERO_SHOT)
    response = gateway.complete(
        ChatRequest(system_prompt="", user_content=rendered, tag="decompose")
    )
    parsed = parse_subqueries(response.text)
    warnings: list[str] = []
    if not parsed:
        warnings.append("decompose: unparseable output, using whole note as single query")
        return [SubQuery(text=note)], warnings
    if len(parsed) > MAX_QUERIES:
        warnings.append(
            f"decompose: {len(parsed)} queries parsed, truncated to {MAX_QUERIES}"
        )
        return parsed[:MAX_QUERIES], warnings
    if len(parsed) < MIN_QUERIES:
        warnings.append(
            f"decompose: only {len(parsed)} queries parsed, padded with whole note"
        )
        return parsed + [SubQuery(text=note)], warnings
    return parsed, warnings
