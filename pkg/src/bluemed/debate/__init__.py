"""Two-expert debate engine with consensus gate and blinded judge."""

from bluemed.debate.arguments import ExpertArgument, parse_expert_argument
from bluemed.debate.consensus import ConsensusRecord, check_consensus
from bluemed.debate.judge import (
    FALLBACK_VERDICT,
    JudgeVerdict,
    build_judge_user_content,
    parse_judge_verdict,
)
from bluemed.debate.orchestrator import (
    DebateState,
    Gateways,
    adjudicate,
    run_debate,
    run_round1,
    run_round2,
)
from bluemed.debate.transcript import (
    TRANSCRIPT_SCHEMA_VERSION,
    export_transcript,
    load_transcript,
    state_to_record,
)

__all__ = [
    "ConsensusRecord",
    "DebateState",
    "ExpertArgument",
    "FALLBACK_VERDICT",
    "Gateways",
    "JudgeVerdict",
    "TRANSCRIPT_SCHEMA_VERSION",
    "adjudicate",
    "build_judge_user_content",
    "check_consensus",
    "export_transcript",
    "load_transcript",
    "parse_expert_argument",
    "parse_judge_verdict",
    "run_debate",
    "run_round1",
    "run_round2",
    "state_to_record",
]
