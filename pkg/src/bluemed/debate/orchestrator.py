"""Debate state machine: round 1, consensus gate, round 2, adjudication.

Stage functions only append to the state; nothing is erased or rewritten,
so an exported transcript shows every intermediate product. The two expert
calls within a round run concurrently; stages are sequential.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

from bluemed.common import EXPERT_SOURCE, Expert, Label, Source
from bluemed.debate.arguments import ExpertArgument, parse_expert_argument
from bluemed.debate.consensus import ConsensusRecord, check_consensus
from bluemed.debate.judge import (
    FALLBACK_VERDICT,
    JudgeVerdict,
    build_judge_user_content,
    parse_judge_verdict,
)
from bluemed.errors import ArgumentParseError
from bluemed.llm.decompose import decompose_note
from bluemed.llm.prompts import Mode, TemplateId, render_prompt
from bluemed.llm.provider import ChatRequest, Gateway, Provider, UsageLedger
from bluemed.retrieval.engine import RetrievalEngine, ScoredChunk, SubQuery

_SOURCE_TITLE = {Source.MAYO: "Mayo Clinic", Source.WEBMD: "WebMD"}
EXPERT_TEMPLATE = {Expert.A: TemplateId.EXPERT_A, Expert.B: TemplateId.EXPERT_B}
ROUND1_TAG = {Expert.A: "expert_A_r1", Expert.B: "expert_B_r1"}
ROUND2_TAG = {Expert.A: "expert_A_r2", Expert.B: "expert_B_r2"}
_OPPONENT = {Expert.A: Expert.B, Expert.B: Expert.A}

COUNTER_INSTRUCTION = (
    "Write a counter-argument addressing your colleague's reasoning. Re-examine the "
    "note against your reference passages, keep or revise your classification, and "
    "conclude again with the required sentence."
)


@dataclass
class Gateways:
    """Per-role gateways; roles may share one provider and one ledger."""

    expert_a: Gateway
    expert_b: Gateway
    judge: Gateway
    decomposer: Gateway

    @classmethod
    def single(cls, provider: Provider, retries: int = 3, backoff: float = 0.5) -> "Gateways":
        ledger = UsageLedger()
        make = lambda: Gateway(provider, ledger, retries, backoff)  # noqa: E731
        return cls(expert_a=make(), expert_b=make(), judge=make(), decomposer=make())

    @property
    def ledgers(self) -> list[UsageLedger]:
        seen: list[UsageLedger] = []
        for gw in (self.expert_a, self.expert_b, self.judge, self.decomposer):
            if all(gw.ledger is not s for s in seen):
                seen.append(gw.ledger)
        return seen

    def usage_snapshot(self) -> dict:
        ledgers = self.ledgers
        if len(ledgers) == 1:
            return ledgers[0].snapshot()
        merged: dict[str, dict[str, int]] = {}
        for ledger in ledgers:
            for tag, row in ledger.snapshot()["per_stage"].items():
                slot = merged.setdefault(
                    tag, {"calls": 0, "attempts": 0, "input_tokens": 0, "output_tokens": 0}
                )
                for key in slot:
                    slot[key] += row[key]
        totals = {"calls": 0, "attempts": 0, "input_tokens": 0, "output_tokens": 0}
        for row in merged.values():
            for key in totals:
                totals[key] += row[key]
        return {"per_stage": dict(sorted(merged.items())), "totals": totals}


@dataclass
class DebateState:
    note: str
    note_id: str = ""
    sub_queries: list[SubQuery] = field(default_factory=list)
    evidence_a: list[ScoredChunk] = field(default_factory=list)
    evidence_b: list[ScoredChunk] = field(default_factory=list)
    round1: tuple[ExpertArgument, ExpertArgument] | None = None
    round2: tuple[ExpertArgument, ExpertArgument] | None = None
    consensus: ConsensusRecord | None = None
    cross_evidence: dict[Source, list[ScoredChunk]] = field(default_factory=dict)
    verdict: JudgeVerdict | None = None
    warnings: list[str] = field(default_factory=list)

    def evidence_for(self, expert: Expert) -> list[ScoredChunk]:
        return self.evidence_a if expert is Expert.A else self.evidence_b

    def latest_arguments(self) -> tuple[ExpertArgument, ExpertArgument]:
        """Each expert's most recent argument (Round 2 when it ran)."""
        if self.round2 is not None:
            return self.round2
        if self.round1 is None:
            raise ValueError("round 1 has not run")
        return self.round1

    def all_arguments(self) -> list[ExpertArgument]:
        out: list[ExpertArgument] = []
        if self.round1 is not None:
            out.extend(self.round1)
        if self.round2 is not None:
            out.extend(self.round2)
        return out

    def check(self) -> None:
        if self.round2 is not None:
            if self.consensus is None or self.consensus.reached:
                raise ValueError("round 2 present without a failed consensus check")
        if self.verdict is not None and self.round1 is None:
            raise ValueError("verdict present without round 1")


def _evidence_block(evidence: Sequence[ScoredChunk], source: Source) -> str:
    title = f"Reference passages ({_SOURCE_TITLE[source]}):"
    if not evidence:
        return title + "\n(no reference passages retrieved)"
    lines = [title]
    for scored in evidence:
        lines.append(f"[{scored.chunk.chunk_id}] {scored.chunk.text}")
    return "\n".join(lines)


def build_round1_user_content(note: str, evidence: Sequence[ScoredChunk], expert: Expert) -> str:
    source = EXPERT_SOURCE[expert]
    return f"Clinical note:\n{note}\n\n{_evidence_block(evidence, source)}\n"


def build_round2_user_content(
    note: str,
    evidence: Sequence[ScoredChunk],
    expert: Expert,
    opposing: ExpertArgument,
) -> str:
    base = build_round1_user_content(note, evidence, expert)
    opponent = _OPPONENT[expert]
    return (
        f"{base}\n"
        f"Your colleague, Agent {opponent.value}, argued:\n{opposing.raw_text.strip()}\n\n"
        f"{COUNTER_INSTRUCTION}\n"
    )


def default_argument(raw: str, expert: Expert, round_: int) -> ExpertArgument:
    # Conservative stand-in when the model output has no parseable label.
    return ExpertArgument(
        expert=expert, round=round_, raw_text=raw, label=Label.CORRECT, confidence=None
    )


def _call_expert(
    gateway: Gateway,
    expert: Expert,
    round_: int,
    user_content: str,
    mode: Mode,
    exemplar_path: str | Path | None,
    uncertainty_phrases: Sequence[str] | None,
    warnings: list[str],
) -> ExpertArgument:
    system_prompt = render_prompt(
        EXPERT_TEMPLATE[expert], mode=mode, exemplar_path=exemplar_path
    )
    tag = (ROUND1_TAG if round_ == 1 else ROUND2_TAG)[expert]
    response = gateway.complete(
        ChatRequest(system_prompt=system_prompt, user_content=user_content, tag=tag)
    )
    try:
        arg = parse_expert_argument(response.text, expert, round_, uncertainty_phrases)
    except ArgumentParseError as exc:
        warnings.append(f"expert {expert.value} round {round_}: {exc}; defaulting to CORRECT")
        return default_argument(response.text, expert, round_)
    if arg.over_word_limit:
        warnings.append(f"expert {expert.value} round {round_} exceeded the 300-word limit")
    return arg


def run_round1(
    state: DebateState,
    gateways: Gateways,
    mode: Mode = Mode.ZERO_SHOT,
    exemplar_path: str | Path | None = None,
    uncertainty_phrases: Sequence[str] | None = None,
) -> DebateState:
    """Issue both independent round-1 analyses concurrently."""
    warnings_a: list[str] = []
    warnings_b: list[str] = []
    with ThreadPoolExecutor(max_workers=2) as pool:
        fut_a = pool.submit(
            _call_expert,
            gateways.expert_a,
            Expert.A,
            1,
            build_round1_user_content(state.note, state.evidence_a, Expert.A),
            mode,
            exemplar_path,
            uncertainty_phrases,
            warnings_a,
        )
        fut_b = pool.submit(
            _call_expert,
            gateways.expert_b,
            Expert.B,
            1,
            build_round1_user_content(state.note, state.evidence_b, Expert.B),
            mode,
            exemplar_path,
            uncertainty_phrases,
            warnings_b,
        )
        arg_a, arg_b = fut_a.result(), fut_b.result()
    # State mutates only after both futures resolve.
    state.warnings.extend(warnings_a + warnings_b)
    state.round1 = (arg_a, arg_b)
    return state


def run_round2(
    state: DebateState,
    gateways: Gateways,
    mode: Mode = Mode.ZERO_SHOT,
    exemplar_path: str | Path | None = None,
    uncertainty_phrases: Sequence[str] | None = None,
) -> DebateState:
    """Cross-examination round; round-1 evidence is reused verbatim."""
    if state.round1 is None:
        raise ValueError("round 2 requires round 1")
    if state.consensus is None or state.consensus.reached:
        raise ValueError("round 2 runs only after a failed consensus check")
    arg_a, arg_b = state.round1
    warnings_a: list[str] = []
    warnings_b: list[str] = []
    with ThreadPoolExecutor(max_workers=2) as pool:
        fut_a = pool.submit(
            _call_expert,
            gateways.expert_a,
            Expert.A,
            2,
            build_round2_user_content(state.note, state.evidence_a, Expert.A, arg_b),
            mode,
            exemplar_path,
            uncertainty_phrases,
            warnings_a,
        )
        fut_b = pool.submit(
            _call_expert,
            gateways.expert_b,
            Expert.B,
            2,
            build_round2_user_content(state.note, state.evidence_b, Expert.B, arg_a),
            mode,
            exemplar_path,
            uncertainty_phrases,
            warnings_b,
        )
        counter_a, counter_b = fut_a.result(), fut_b.result()
    state.warnings.extend(warnings_a + warnings_b)
    state.round2 = (counter_a, counter_b)
    return state


def adjudicate(state: DebateState, gateways: Gateways) -> JudgeVerdict:
    """Blinded judge call over the transcript and cross-source references."""
    arguments = state.all_arguments()
    user_content = build_judge_user_content(arguments, state.cross_evidence)
    system_prompt = render_prompt(TemplateId.JUDGE)
    response = gateways.judge.complete(
        ChatRequest(system_prompt=system_prompt, user_content=user_content, tag="judge")
    )
    try:
        verdict, parse_warnings = parse_judge_verdict(response.text)
        state.warnings.extend(parse_warnings)
    except ArgumentParseError as exc:
        state.warnings.append(f"judge verdict unparseable ({exc}); using fallback verdict")
        verdict = FALLBACK_VERDICT
    state.verdict = verdict
    state.check()
    return verdict


def claimed_terms(arguments: Sequence[ExpertArgument]) -> list[str]:
    """Distinct claimed terms, in expert order, for the cross-source query."""
    out: list[str] = []
    for arg in arguments:
        for term in (arg.wrong_term, arg.correct_term):
            if term and term not in out:
                out.append(term)
    return out


def run_debate(
    note: str,
    engine: RetrievalEngine,
    gateways: Gateways,
    mode: Mode = Mode.ZERO_SHOT,
    exemplar_path: str | Path | None = None,
    uncertainty_phrases: Sequence[str] | None = None,
    note_id: str = "",
) -> tuple[JudgeVerdict, DebateState]:
    """Full per-note flow, returning the provisional verdict and the state.

    Any stage failure propagates; batch callers record a per-note failure
    and move on.
    """
    state = DebateState(note=note, note_id=note_id)

    sub_queries, warnings = decompose_note(note, gateways.decomposer)
    state.sub_queries = sub_queries
    state.warnings.extend(warnings)

    outcome_a = engine.retrieve_for_expert(sub_queries, Expert.A)
    outcome_b = engine.retrieve_for_expert(sub_queries, Expert.B)
    state.evidence_a = outcome_a.evidence
    state.evidence_b = outcome_b.evidence
    state.warnings.extend(outcome_a.warnings + outcome_b.warnings)

    run_round1(state, gateways, mode, exemplar_path, uncertainty_phrases)
    assert state.round1 is not None
    state.consensus = check_consensus(*state.round1)
    if not state.consensus.reached:
        run_round2(state, gateways, mode, exemplar_path, uncertainty_phrases)

    state.cross_evidence = engine.cross_source_retrieve(
        note, claimed_terms(state.latest_arguments())
    )
    verdict = adjudicate(state, gateways)
    return verdict, state
