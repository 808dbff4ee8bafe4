"""Round-1 consensus detection.

Consensus short-circuits Round 2. Labels must match; when both experts say
INCORRECT they must also name the same wrong term and the same correction
after normalization. A term missing on either side blocks consensus.
"""

from __future__ import annotations

from dataclasses import dataclass

from bluemed.common import Label, normalize_term
from bluemed.debate.arguments import ExpertArgument


@dataclass(frozen=True)
class ConsensusRecord:
    reached: bool
    reason: str

    def to_record(self) -> dict:
        return {"reached": self.reached, "reason": self.reason}


def _norm(term: str | None) -> str | None:
    if term is None:
        return None
    value = normalize_term(term)
    return value or None


def check_consensus(arg_a: ExpertArgument, arg_b: ExpertArgument) -> ConsensusRecord:
    if arg_a.label is not arg_b.label:
        return ConsensusRecord(False, "labels differ")
    if arg_a.label is Label.CORRECT:
        return ConsensusRecord(True, "both experts classify the note as CORRECT")

    wrong_a, wrong_b = _norm(arg_a.wrong_term), _norm(arg_b.wrong_term)
    correct_a, correct_b = _norm(arg_a.correct_term), _norm(arg_b.correct_term)
    if wrong_a is None or wrong_b is None or wrong_a != wrong_b:
        return ConsensusRecord(False, "wrong terms missing or differ")
    if correct_a is None or correct_b is None or correct_a != correct_b:
        return ConsensusRecord(False, "correct terms missing or differ")
    return ConsensusRecord(True, "both experts agree on INCORRECT with matching terms")
