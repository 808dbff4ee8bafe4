"""Parsing of expert model output into structured arguments."""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Sequence

from bluemed.common import Expert, Label, normalize_term
from bluemed.errors import ArgumentParseError

WORD_LIMIT = 300

# INCORRECT must precede CORRECT in the alternation: "INCORRECT" contains
# "CORRECT" as a substring and the label sentence match is case-insensitive.
_LABEL_RE = re.compile(
    r"based\s+on\s+my\s+analysis\s*,?\s+this\s+note\s+is\b[^.]*?\b(INCORRECT|CORRECT)\b",
    re.IGNORECASE,
)
# Field values never span lines; [ \t]* keeps a blank value from
# swallowing the following line.
_WRONG_RE = re.compile(r"wrong\s+term\s*[:=][ \t]*(.+)", re.IGNORECASE)
_CORRECT_RE = re.compile(r"correct\s+term\s*[:=][ \t]*(.+)", re.IGNORECASE)
_IMPACT_RE = re.compile(r"(?:clinical\s+)?impact\s*[:=][ \t]*(.+)", re.IGNORECASE)
_CONFIDENCE_RE = re.compile(
    r"confidence(?:\s+score)?\s*(?:[:=]|\bof\b)?\s*(\d+(?:\.\d+)?)", re.IGNORECASE
)


@dataclass(frozen=True)
class ExpertArgument:
    expert: Expert
    round: int
    raw_text: str
    label: Label
    wrong_term: str | None = None
    correct_term: str | None = None
    impact: str = ""
    confidence: float | None = None
    uncertainty_phrase_count: int = 0

    def __post_init__(self) -> None:
        if self.round not in (1, 2):
            raise ValueError("round must be 1 or 2")
        if self.uncertainty_phrase_count < 0:
            raise ValueError("uncertainty_phrase_count must be >= 0")

    @property
    def over_word_limit(self) -> bool:
        # Length violations are recorded, never rejected.
        return len(self.raw_text.split()) > WORD_LIMIT

    def to_record(self) -> dict:
        return {
            "expert": self.expert.value,
            "round": self.round,
            "raw_text": self.raw_text,
            "label": self.label.value,
            "wrong_term": self.wrong_term,
            "correct_term": self.correct_term,
            "impact": self.impact,
            "confidence": self.confidence,
            "uncertainty_phrase_count": self.uncertainty_phrase_count,
            "over_word_limit": self.over_word_limit,
        }


def _term_field(pattern: re.Pattern[str], raw: str) -> str | None:
    m = pattern.search(raw)
    if m is None:
        return None
    value = normalize_term(m.group(1).splitlines()[0])
    return value or None


def _text_field(pattern: re.Pattern[str], raw: str) -> str:
    m = pattern.search(raw)
    if m is None:
        return ""
    return m.group(1).splitlines()[0].strip()


def parse_expert_argument(
    raw: str,
    expert: Expert,
    round_: int,
    uncertainty_phrases: Sequence[str] | None = None,
) -> ExpertArgument:
    """Parse one expert response.

    The classification is read from the mandated concluding sentence; the
    final occurrence wins when the sentence is repeated. A missing sentence
    raises :class:`ArgumentParseError`; the orchestrator owns the
    conservative CORRECT fallback so the failure is never silent here.
    """
    if not raw.strip():
        raise ArgumentParseError(f"empty response from expert {expert.value}")
    labels = _LABEL_RE.findall(raw)
    if not labels:
        raise ArgumentParseError(
            f"no classification sentence found in expert {expert.value} round {round_} output"
        )
    label = Label(labels[-1].upper())

    confidence: float | None = None
    m = _CONFIDENCE_RE.search(raw)
    if m:
        confidence = float(m.group(1))

    if uncertainty_phrases is None:
        from bluemed.safety.terms import DEFAULT_UNCERTAINTY_PHRASES

        uncertainty_phrases = DEFAULT_UNCERTAINTY_PHRASES
    from bluemed.safety.terms import count_uncertainty

    return ExpertArgument(
        expert=expert,
        round=round_,
        raw_text=raw,
        label=label,
        wrong_term=_term_field(_WRONG_RE, raw),
        correct_term=_term_field(_CORRECT_RE, raw),
        impact=_text_field(_IMPACT_RE, raw),
        confidence=confidence,
        uncertainty_phrase_count=count_uncertainty(raw, uncertainty_phrases),
    )
