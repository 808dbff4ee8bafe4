"""Shared enums and text helpers used across the pipeline."""

from __future__ import annotations

import re
from enum import Enum

_WS_RUN = re.compile(r"\s+")


class Source(str, Enum):
    """Origin of an evidence chunk. MAYO/WEBMD are offline collections;
    ONLINE is reserved for passages fetched at query time."""

    MAYO = "MAYO"
    WEBMD = "WEBMD"
    ONLINE = "ONLINE"


class Expert(str, Enum):
    """Debate participants. A is bound to MAYO, B to WEBMD."""

    A = "A"
    B = "B"


class Label(str, Enum):
    """Binary note classification."""

    CORRECT = "CORRECT"
    INCORRECT = "INCORRECT"


# Collection assignment is fixed by construction: each expert only ever
# sees evidence from its own source.
EXPERT_SOURCE: dict[Expert, Source] = {Expert.A: Source.MAYO, Expert.B: Source.WEBMD}


def normalize_whitespace(text: str) -> str:
    """Collapse whitespace runs to single spaces and trim the ends."""
    return _WS_RUN.sub(" ", text).strip()


def normalize_term(term: str) -> str:
    """Canonical form for term comparison: lowercase, collapsed whitespace,
    surrounding quote characters stripped."""
    t = normalize_whitespace(term).lower()
    return t.strip("\"'“”‘’`").strip()
