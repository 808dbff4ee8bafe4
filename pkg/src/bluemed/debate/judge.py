"""Blinded adjudication: judge prompt assembly and verdict parsing.

The judge sees the debate transcript and cross-source reference passages,
never the clinical note itself. Each expert's claims are paired with the
opposing source's references: Agent A (Mayo-grounded) is checked against
WebMD passages and Agent B against Mayo passages.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from typing import TYPE_CHECKING, Mapping, Sequence

from bluemed.common import Expert, Label, Source
from bluemed.errors import ArgumentParseError

if TYPE_CHECKING:
    from bluemed.debate.arguments import ExpertArgument
    from bluemed.retrieval.engine import ScoredChunk

CONFIDENCE_MIN = 1
CONFIDENCE_MAX = 10

FALLBACK_VERDICT_REASONING = "parse failure"

_JSON_BLOCK_RE = re.compile(r"\{.*\}", re.DOTALL)

_EXPERT_TITLE = {Expert.A: "Agent A (Mayo Clinic expert)", Expert.B: "Agent B (WebMD expert)"}
_VALIDATION_SOURCE = {Expert.A: Source.WEBMD, Expert.B: Source.MAYO}
_SOURCE_TITLE = {Source.WEBMD: "WebMD", Source.MAYO: "Mayo Clinic"}


@dataclass(frozen=True)
class JudgeVerdict:
    answer: Label
    confidence: int
    winner: Expert
    reasoning: str

    def __post_init__(self) -> None:
        if not CONFIDENCE_MIN <= self.confidence <= CONFIDENCE_MAX:
            raise ValueError(f"confidence must be in [{CONFIDENCE_MIN}, {CONFIDENCE_MAX}]")

    def to_record(self) -> dict:
        return {
            "answer": self.answer.value,
            "confidence": self.confidence,
            "winner": self.winner.value,
            "reasoning": self.reasoning,
        }


FALLBACK_VERDICT = JudgeVerdict(
    answer=Label.CORRECT,
    confidence=CONFIDENCE_MIN,
    winner=Expert.A,
    reasoning=FALLBACK_VERDICT_REASONING,
)


def build_judge_user_content(
    arguments: Sequence["ExpertArgument"],
    cross_evidence: Mapping[Source, Sequence["ScoredChunk"]],
) -> str:
    """Assemble the judge's user message from transcript plus references.

    Accepts the two-argument (consensus) and four-argument (full debate)
    transcripts. The note text is deliberately absent from every part.
    """
    if len(arguments) not in (2, 4):
        raise ValueError("judge transcript must contain 2 or 4 arguments")

    parts = ["Debate transcript:"]
    for arg in arguments:
        title = _EXPERT_TITLE[arg.expert]
        stage = "Round 1" if arg.round == 1 else "Round 2 counter-argument"
        parts.append(f"{title}, {stage}:\n{arg.raw_text.strip()}")

    parts.append("Cross-source verification references:")
    for expert in (Expert.A, Expert.B):
        source = _VALIDATION_SOURCE[expert]
        chunks = cross_evidence.get(source, [])
        header = (
            f"Validate {_EXPERT_TITLE[expert].split(' (')[0]}'s assertions against the "
            f"following {_SOURCE_TITLE[source]} references:"
        )
        if not chunks:
            parts.append(header + "\n(no references retrieved)")
            continue
        lines = [header]
        for scored in chunks:
            lines.append(f"[{scored.chunk.chunk_id}] {scored.chunk.text}")
        parts.append("\n".join(lines))
    return "\n\n".join(parts) + "\n"


def _parse_winner(value: object) -> Expert:
    text = str(value).strip().lower()
    if re.search(r"\ba\b", text) or "mayo" in text:
        return Expert.A
    if re.search(r"\bb\b", text) or "webmd" in text:
        return Expert.B
    raise ArgumentParseError(f"unrecognized winner value: {value!r}")


def parse_judge_verdict(raw: str) -> tuple[JudgeVerdict, list[str]]:
    """Parse the judge's JSON reply; returns (verdict, warnings).

    Out-of-range confidence is clamped with a warning. Anything that
    prevents building a complete verdict raises
    :class:`ArgumentParseError`; the orchestrator substitutes the
    conservative fallback.
    """
    m = _JSON_BLOCK_RE.search(raw)
    if m is None:
        raise ArgumentParseError("no JSON object in judge output")
    try:
        payload = json.loads(m.group(0))
    except json.JSONDecodeError as exc:
        raise ArgumentParseError(f"judge JSON malformed: {exc}") from exc
    if not isinstance(payload, dict):
        raise ArgumentParseError("judge JSON is not an object")

    missing = [k for k in ("Final Answer", "Confidence Score", "Winner", "Reasoning") if k not in payload]
    if missing:
        raise ArgumentParseError(f"judge JSON missing keys: {', '.join(missing)}")

    answer_text = str(payload["Final Answer"]).strip().upper()
    if answer_text not in (Label.CORRECT.value, Label.INCORRECT.value):
        raise ArgumentParseError(f"unrecognized Final Answer: {payload['Final Answer']!r}")

    warnings: list[str] = []
    try:
        confidence = int(round(float(payload["Confidence Score"])))
    except (TypeError, ValueError) as exc:
        raise ArgumentParseError(
            f"non-numeric Confidence Score: {payload['Confidence Score']!r}"
        ) from exc
    clamped = min(max(confidence, CONFIDENCE_MIN), CONFIDENCE_MAX)
    if clamped != confidence:
        warnings.append(f"judge confidence {confidence} clamped to {clamped}")

    verdict = JudgeVerdict(
        answer=Label(answer_text),
        confidence=clamped,
        winner=_parse_winner(payload["Winner"]),
        reasoning=str(payload["Reasoning"]),
    )
    return verdict, warnings
