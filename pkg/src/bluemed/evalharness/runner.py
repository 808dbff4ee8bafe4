"""Batch evaluation driver for the full pipeline and its ablation baselines.

Pipelines:
  BLUEMED          decomposition, partitioned hybrid retrieval, two-expert
                   debate, blinded judge, safety cascade;
  RAG_SINGLE_*     retrieval plus one expert call, label taken directly
                   (no debate, judge, or safety), binary scoring;
  LLM_DEBATE       debate plus safety with retrieval disabled entirely
                   (no decomposition, no expert evidence, no cross-source
                   pass).

Each run uses a fresh provider instance so scripted state (retry budgets)
resets and repeated runs of a deterministic mock are byte-identical.
"""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Callable, Sequence

from bluemed.common import Expert, Label, Source
from bluemed.debate.arguments import parse_expert_argument
from bluemed.debate.consensus import check_consensus
from bluemed.debate.orchestrator import (
    DebateState,
    Gateways,
    ROUND1_TAG,
    EXPERT_TEMPLATE,
    adjudicate,
    build_round1_user_content,
    run_debate,
    run_round1,
    run_round2,
)
from bluemed.debate.transcript import (
    TRANSCRIPT_SCHEMA_VERSION,
    dumps_record,
    evidence_records,
    state_to_record,
)
from bluemed.errors import ArgumentParseError, BluemedError
from bluemed.evalharness.dataset import EvalRecord, dataset_stats
from bluemed.evalharness.metrics import (
    MetricsReport,
    PredictionRecord,
    average_reports,
    compute_metrics,
    score_from_verdict,
)
from bluemed.kb.chunking import fingerprint
from bluemed.llm.decompose import decompose_note
from bluemed.llm.prompts import Mode, render_prompt
from bluemed.llm.provider import ChatRequest, Provider
from bluemed.retrieval.engine import RetrievalEngine
from bluemed.safety.cascade import HeuristicConfig, apply_safety

REPORT_SCHEMA_VERSION = 1


class Pipeline(str, Enum):
    BLUEMED = "bluemed"
    RAG_SINGLE_MAYO = "rag-single-mayo"
    RAG_SINGLE_WEBMD = "rag-single-webmd"
    LLM_DEBATE = "llm-debate"


class ScoreMode(str, Enum):
    CONFIDENCE = "confidence"
    BINARY = "binary"


_RAG_EXPERT = {Pipeline.RAG_SINGLE_MAYO: Expert.A, Pipeline.RAG_SINGLE_WEBMD: Expert.B}


@dataclass
class EvalDeps:
    """Everything a run needs besides the dataset itself.

    ``provider_factory`` is invoked once per run per role; factories must
    return independent instances so per-run scripted state resets.
    """

    provider_factory: Callable[[], dict[str, Provider]]
    engine: RetrievalEngine | None
    heuristics: HeuristicConfig
    mode: Mode = Mode.ZERO_SHOT
    exemplar_path: str | Path | None = None
    score_mode: ScoreMode = ScoreMode.CONFIDENCE
    concurrency: int = 4
    retries: int = 3
    backoff: float = 0.0
    config_snapshot: dict = field(default_factory=dict)


@dataclass
class CaseResult:
    note_id: str
    final_label: Label
    score: float
    record: dict
    overridden: bool = False


class _RunContext:
    """Per-run provider set; hands out per-note gateway bundles."""

    def __init__(self, deps: EvalDeps) -> None:
        self.deps = deps
        self.providers = deps.provider_factory()

    def note_gateways(self) -> Gateways:
        from bluemed.llm.provider import Gateway, UsageLedger

        ledger = UsageLedger()
        make = lambda role: Gateway(  # noqa: E731
            self.providers[role], ledger, self.deps.retries, self.deps.backoff
        )
        return Gateways(
            expert_a=make("expert_a"),
            expert_b=make("expert_b"),
            judge=make("judge"),
            decomposer=make("decomposer"),
        )


def _score(final: Label, confidence: int, score_mode: ScoreMode) -> float:
    if score_mode is ScoreMode.BINARY:
        return 1.0 if final is Label.INCORRECT else 0.0
    return score_from_verdict(final, confidence)


def _finish_debate_case(
    state: DebateState,
    verdict,
    note: str,
    note_id: str,
    pipeline: Pipeline,
    deps: EvalDeps,
    gateways: Gateways,
) -> CaseResult:
    arg_a, arg_b = state.latest_arguments()
    final, audit = apply_safety(verdict, arg_a, arg_b, note, deps.heuristics)
    score = _score(final, verdict.confidence, deps.score_mode)
    record = state_to_record(state, usage=gateways.usage_snapshot())
    record.update(
        {
            "pipeline": pipeline.value,
            "mode": deps.mode.value,
            "safety": audit.to_record(),
            "final_label": final.value,
            "score": score,
        }
    )
    return CaseResult(
        note_id=note_id,
        final_label=final,
        score=score,
        record=record,
        overridden=bool(audit.override_chain),
    )


def _run_bluemed_note(record: EvalRecord, ctx: _RunContext) -> CaseResult:
    deps = ctx.deps
    if deps.engine is None:
        raise BluemedError("bluemed pipeline requires a knowledge base")
    gateways = ctx.note_gateways()
    verdict, state = run_debate(
        note=record.text,
        engine=deps.engine,
        gateways=gateways,
        mode=deps.mode,
        exemplar_path=deps.exemplar_path,
        uncertainty_phrases=deps.heuristics.uncertainty_lexicon,
        note_id=record.note_id,
    )
    return _finish_debate_case(
        state, verdict, record.text, record.note_id, Pipeline.BLUEMED, deps, gateways
    )


def _run_llm_debate_note(record: EvalRecord, ctx: _RunContext) -> CaseResult:
    deps = ctx.deps
    gateways = ctx.note_gateways()
    state = DebateState(note=record.text, note_id=record.note_id)
    state.warnings.append("retrieval disabled (llm-debate baseline)")
    run_round1(
        state, gateways, deps.mode, deps.exemplar_path, deps.heuristics.uncertainty_lexicon
    )
    assert state.round1 is not None
    state.consensus = check_consensus(*state.round1)
    if not state.consensus.reached:
        run_round2(
            state, gateways, deps.mode, deps.exemplar_path, deps.heuristics.uncertainty_lexicon
        )
    verdict = adjudicate(state, gateways)
    return _finish_debate_case(
        state, verdict, record.text, record.note_id, Pipeline.LLM_DEBATE, deps, gateways
    )


def _run_rag_single_note(record: EvalRecord, ctx: _RunContext, pipeline: Pipeline) -> CaseResult:
    deps = ctx.deps
    if deps.engine is None:
        raise BluemedError("rag-single pipelines require a knowledge base")
    expert = _RAG_EXPERT[pipeline]
    gateways = ctx.note_gateways()
    warnings: list[str] = []

    sub_queries, dec_warnings = decompose_note(record.text, gateways.decomposer)
    warnings.extend(dec_warnings)
    outcome = deps.engine.retrieve_for_expert(sub_queries, expert)
    warnings.extend(outcome.warnings)

    system_prompt = render_prompt(
        EXPERT_TEMPLATE[expert], mode=deps.mode, exemplar_path=deps.exemplar_path
    )
    user_content = build_round1_user_content(record.text, outcome.evidence, expert)
    gateway = gateways.expert_a if expert is Expert.A else gateways.expert_b
    response = gateway.complete(
        ChatRequest(system_prompt=system_prompt, user_content=user_content, tag=ROUND1_TAG[expert])
    )
    try:
        argument = parse_expert_argument(
            response.text, expert, 1, deps.heuristics.uncertainty_lexicon
        )
    except ArgumentParseError as exc:
        warnings.append(f"expert {expert.value}: {exc}; defaulting to CORRECT")
        from bluemed.debate.orchestrator import default_argument

        argument = default_argument(response.text, expert, 1)

    final = argument.label
    score = 1.0 if final is Label.INCORRECT else 0.0
    case_record = {
        "schema_version": TRANSCRIPT_SCHEMA_VERSION,
        "pipeline": pipeline.value,
        "mode": deps.mode.value,
        "note_id": record.note_id,
        "note_fingerprint": fingerprint(record.text),
        "sub_queries": [{"text": sq.text, "aspect": sq.aspect} for sq in sub_queries],
        "evidence": {expert.value: evidence_records(outcome.evidence)},
        "argument": argument.to_record(),
        "final_label": final.value,
        "score": score,
        "warnings": warnings,
        "usage": gateways.usage_snapshot(),
    }
    return CaseResult(note_id=record.note_id, final_label=final, score=score, record=case_record)


def run_note(record: EvalRecord, pipeline: Pipeline, ctx: _RunContext) -> CaseResult:
    if pipeline is Pipeline.BLUEMED:
        return _run_bluemed_note(record, ctx)
    if pipeline is Pipeline.LLM_DEBATE:
        return _run_llm_debate_note(record, ctx)
    return _run_rag_single_note(record, ctx, pipeline)


def classify_note(text: str, note_id: str, pipeline: Pipeline, deps: EvalDeps) -> CaseResult:
    """Single-note entry point for the CLI; gold labels are not involved."""
    record = EvalRecord(note_id=note_id, text=text, gold_label=Label.CORRECT)
    return run_note(record, pipeline, _RunContext(deps))


@dataclass
class RunOutcome:
    report: MetricsReport
    cases: list[CaseResult]
    exclusions: list[dict]
    usage: dict
    safety_overrides: int


def _merge_usage(cases: Sequence[CaseResult]) -> dict:
    merged: dict[str, dict[str, int]] = {}
    for case in cases:
        for tag, row in case.record.get("usage", {}).get("per_stage", {}).items():
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


def run_once(
    records: Sequence[EvalRecord], pipeline: Pipeline, deps: EvalDeps
) -> RunOutcome:
    """One pass over the dataset; failures become exclusions, not aborts."""
    ctx = _RunContext(deps)
    results: dict[str, CaseResult] = {}
    failures: dict[str, str] = {}

    def work(record: EvalRecord) -> None:
        try:
            results[record.note_id] = run_note(record, pipeline, ctx)
        except Exception as exc:  # noqa: BLE001 - per-note isolation by contract
            failures[record.note_id] = f"{type(exc).__name__}: {exc}"

    if deps.concurrency <= 1:
        for record in records:
            work(record)
    else:
        with ThreadPoolExecutor(max_workers=deps.concurrency) as pool:
            list(pool.map(work, records))

    cases = [results[nid] for nid in sorted(results)]
    exclusions = [
        {"note_id": nid, "error": failures[nid]} for nid in sorted(failures)
    ]
    included_gold = [r for r in records if r.note_id in results]
    preds = [
        PredictionRecord(
            note_id=case.note_id,
            predicted_label=case.final_label,
            score=case.score,
            audit_ref=f"case_{case.note_id}.json",
        )
        for case in cases
    ]
    if not preds:
        raise BluemedError(
            f"all {len(records)} notes failed; first error: {exclusions[0]['error']}"
        )
    report = compute_metrics(preds, included_gold)
    return RunOutcome(
        report=report,
        cases=cases,
        exclusions=exclusions,
        usage=_merge_usage(cases),
        safety_overrides=sum(1 for c in cases if c.overridden),
    )


def run_evaluation(
    records: Sequence[EvalRecord],
    pipeline: Pipeline,
    deps: EvalDeps,
    runs: int = 2,
    out_dir: str | Path | None = None,
) -> dict:
    """Run the pipeline ``runs`` times, average metrics, write artifacts.

    Returns the full report dict (also written to ``report.json`` when an
    output directory is given, alongside per-run case files).
    """
    if runs < 1:
        raise ValueError("runs must be >= 1")
    outcomes = [run_once(records, pipeline, deps) for _ in range(runs)]
    averaged = average_reports([o.report for o in outcomes])

    report = {
        "schema_version": REPORT_SCHEMA_VERSION,
        "pipeline": pipeline.value,
        "mode": deps.mode.value,
        "score_mode": deps.score_mode.value,
        "runs": runs,
        "dataset": dataset_stats(list(records)),
        "per_run": [
            {
                "run_index": i + 1,
                "metrics": outcome.report.to_record(),
                "exclusions": outcome.exclusions,
                "usage": outcome.usage,
                "safety_overrides": outcome.safety_overrides,
            }
            for i, outcome in enumerate(outcomes)
        ],
        "averaged": averaged.to_record(),
        "excluded_total": sum(len(o.exclusions) for o in outcomes),
        "config_snapshot": deps.config_snapshot,
    }

    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        for i, outcome in enumerate(outcomes, start=1):
            run_dir = out / f"run{i}"
            run_dir.mkdir(parents=True, exist_ok=True)
            for case in outcome.cases:
                (run_dir / f"case_{case.note_id}.json").write_text(
                    dumps_record(case.record), encoding="utf-8"
                )
        (out / "report.json").write_text(
            json.dumps(report, sort_keys=True, ensure_ascii=True, indent=2) + "\n",
            encoding="utf-8",
        )
    return report
