"""Lexical building blocks for the safety cascade.

Phrase matching is word-bounded, case-insensitive, whitespace-flexible, and
non-overlapping per phrase; counts use occurrence semantics (the same
phrase twice counts twice). Term pairs are extracted from parsed argument
fields first, then from inline conventions in the raw text.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from functools import lru_cache
from typing import TYPE_CHECKING, Iterable, Sequence

from bluemed.common import normalize_term, normalize_whitespace

if TYPE_CHECKING:
    from bluemed.debate.arguments import ExpertArgument

DEFAULT_UNCERTAINTY_PHRASES = (
    "may",
    "might",
    "possibly",
    "could",
    "unclear",
    "uncertain",
    "cannot determine",
    "insufficient evidence",
)
DEFAULT_PROCESS_GAP_INDICATORS = (
    "should have ordered",
    "failed to confirm",
    "should have been",
    "was not performed",
)
DEFAULT_HIERARCHY_MARKERS = (
    "more specific",
    "broader term",
    "subtype of",
)
DEFAULT_LAB_CONFIRMATION_PATTERNS = (
    "culture tests indicate",
    "culture confirmed",
    "laboratory results confirm",
)
DEFAULT_SIDE_EFFECT_PATTERNS = (
    "adverse reaction",
    "side effect",
    "drug interaction",
)

_SNIPPET_CONTEXT = 25


@lru_cache(maxsize=512)
def phrase_pattern(phrase: str) -> re.Pattern[str]:
    words = phrase.split()
    if not words:
        raise ValueError("phrase must contain at least one word")
    body = r"\s+".join(re.escape(w) for w in words)
    return re.compile(r"\b" + body + r"\b", re.IGNORECASE)


def count_uncertainty(text: str, lexicon: Sequence[str]) -> int:
    """Total occurrences of any lexicon phrase in the text."""
    if not lexicon:
        raise ValueError("lexicon must be non-empty")
    if not text:
        return 0
    return sum(len(phrase_pattern(p).findall(text)) for p in lexicon)


def find_phrase_snippets(text: str, phrases: Iterable[str]) -> list[str]:
    """Matched occurrences with a little surrounding context, in text order."""
    hits: list[tuple[int, str]] = []
    for phrase in phrases:
        for m in phrase_pattern(phrase).finditer(text):
            lo = max(0, m.start() - _SNIPPET_CONTEXT)
            hi = min(len(text), m.end() + _SNIPPET_CONTEXT)
            hits.append((m.start(), normalize_whitespace(text[lo:hi])))
    hits.sort(key=lambda h: (h[0], h[1]))
    return [snippet for _, snippet in hits]


@dataclass(frozen=True)
class TermPair:
    wrong: str
    correct: str

    def __post_init__(self) -> None:
        if not self.wrong or not self.correct:
            raise ValueError("both terms must be non-empty")
        if self.wrong == self.correct:
            raise ValueError("wrong and correct terms must differ")


def _pair_or_none(wrong: str | None, correct: str | None) -> TermPair | None:
    wrong = normalize_term(wrong or "")
    correct = normalize_term(correct or "")
    if not wrong or not correct or wrong == correct:
        return None
    return TermPair(wrong=wrong, correct=correct)


_QUOTE_CLASS = "\"'“”‘’"
_SHOULD_BE_RE = re.compile(
    rf"[{_QUOTE_CLASS}]([^{_QUOTE_CLASS}]+)[{_QUOTE_CLASS}]\s+should\s+be\s+"
    rf"[{_QUOTE_CLASS}]([^{_QUOTE_CLASS}]+)[{_QUOTE_CLASS}]",
    re.IGNORECASE,
)
_ARROWS = ("→", "->")
_SEGMENT_SPLIT_RE = re.compile(rf"[.,;:()!?{_QUOTE_CLASS}]")
_MAX_TERM_WORDS = 5


def _tail_segment(text: str) -> str:
    pieces = [p.strip() for p in _SEGMENT_SPLIT_RE.split(text)]
    pieces = [p for p in pieces if p]
    if not pieces:
        return ""
    return " ".join(pieces[-1].split()[-_MAX_TERM_WORDS:])


def _head_segment(text: str) -> str:
    pieces = [p.strip() for p in _SEGMENT_SPLIT_RE.split(text)]
    pieces = [p for p in pieces if p]
    if not pieces:
        return ""
    return " ".join(pieces[0].split()[:_MAX_TERM_WORDS])


def _inline_pair(raw: str) -> TermPair | None:
    m = _SHOULD_BE_RE.search(raw)
    if m:
        pair = _pair_or_none(m.group(1), m.group(2))
        if pair is not None:
            return pair
    for line in raw.splitlines():
        for arrow in _ARROWS:
            if arrow not in line:
                continue
            left, _, right = line.partition(arrow)
            pair = _pair_or_none(_tail_segment(left), _head_segment(right))
            if pair is not None:
                return pair
    return None


def extract_term_pair(argument: "ExpertArgument") -> TermPair | None:
    """Valid wrong/correct pair from an argument, or None.

    Labeled fields take precedence; when both are stated they must be
    distinct after normalization or no pair exists (inline conventions are
    not consulted to repair contradictory labeled fields). Inline forms
    (quoted "should be" and arrow notation) back up missing fields.
    """
    if argument.wrong_term and argument.correct_term:
        return _pair_or_none(argument.wrong_term, argument.correct_term)
    return _inline_pair(argument.raw_text)
