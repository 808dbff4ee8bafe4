"""Command-line entry point.

Commands: ``build-kb`` (ingest + index + persist), ``classify`` (one note),
``evaluate`` (batch + metrics), ``inspect`` (render a transcript).

Exit codes: 0 success, 1 usage or configuration error, 2 pipeline failure.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click
import numpy as np

from bluemed.common import Source
from bluemed.config import EmbedderSettings, RunConfig
from bluemed.errors import (
    BluemedError,
    ConfigError,
    CredentialError,
    DatasetError,
    IngestError,
    PromptError,
    TranscriptError,
)
from bluemed.evalharness.dataset import load_dataset
from bluemed.evalharness.metrics import (
    REPORT_HEADER,
    MetricsReport,
    format_report_row,
)
from bluemed.evalharness.runner import (
    EvalDeps,
    Pipeline,
    ScoreMode,
    classify_note,
    run_evaluation,
)
from bluemed.kb.corpus import ingest_collection, load_collection, save_collection
from bluemed.llm.embeddings import EmbeddingClient, HttpEmbedder, MockEmbedder
from bluemed.llm.prompts import Mode
from bluemed.llm.provider import HttpChatProvider, MockProvider, Provider
from bluemed.retrieval.dense import DenseIndex
from bluemed.retrieval.engine import RetrievalEngine
from bluemed.retrieval.online import FixtureFetcher, HttpFetcher
from bluemed.safety.cascade import HeuristicConfig, load_heuristic_config

_USAGE_ERRORS = (ConfigError, CredentialError, DatasetError, IngestError, TranscriptError)

_PIPELINE_CHOICES = [p.value for p in Pipeline]
_MODE_CHOICES = [m.value for m in Mode]

_COLLECTION_NAMES = {Source.MAYO: "mayo", Source.WEBMD: "webmd"}

EMBEDDINGS_FILE = "embeddings.npy"
EMBEDDING_META_FILE = "embedding_meta.json"


@click.group()
def cli() -> None:
    """Clinical note error detection via retrieval-grounded expert debate."""


def _load_config(config_path: str | None) -> RunConfig:
    if config_path is None:
        return RunConfig()
    return RunConfig.load(config_path)


def _embed_client(settings: EmbedderSettings) -> EmbeddingClient:
    if settings.kind == "mock":
        return EmbeddingClient(MockEmbedder(settings.dim))
    return EmbeddingClient(
        HttpEmbedder(
            settings.endpoint, settings.model, settings.api_key_env, settings.dim, settings.timeout
        )
    )


def _load_engine(cfg: RunConfig, online_enabled: bool) -> RetrievalEngine:
    embed_client = _embed_client(cfg.embedder)
    collections = {}
    dense_indexes = {}
    for source, name in _COLLECTION_NAMES.items():
        collection = load_collection(cfg.kb_root, name)
        collections[source] = collection
        emb_path = Path(cfg.kb_root) / name / EMBEDDINGS_FILE
        if emb_path.exists():
            matrix = np.load(emb_path)
            if matrix.shape != (len(collection), embed_client.dim):
                raise IngestError(
                    f"{emb_path}: persisted embeddings shape {matrix.shape} does not match "
                    f"{len(collection)} chunks x dim {embed_client.dim}; rebuild the kb"
                )
            dense_indexes[source] = DenseIndex(
                [c.chunk_id for c in collection.chunks], matrix
            )
    fetcher = None
    if online_enabled:
        if cfg.online.fixture:
            fixture_path = Path(cfg.online.fixture)
            if not fixture_path.is_file():
                raise ConfigError(f"online fixture not found: {fixture_path}")
            fetcher = FixtureFetcher(json.loads(fixture_path.read_text(encoding="utf-8")))
        else:
            urls = {}
            if cfg.online.mayo_url:
                urls[Source.MAYO] = cfg.online.mayo_url
            if cfg.online.webmd_url:
                urls[Source.WEBMD] = cfg.online.webmd_url
            if urls:
                fetcher = HttpFetcher(urls)
    return RetrievalEngine.build(
        collections,
        embed_client.embed,
        cfg.fusion,
        dense_indexes=dense_indexes or None,
        fetcher=fetcher,
        online_enabled=online_enabled and fetcher is not None,
        online_policy=cfg.chunking,
        online_max_pages=cfg.online.max_pages,
    )


def _provider_factory(cfg: RunConfig, mock_script: str | None):
    from bluemed.config import PROVIDER_ROLES

    if mock_script is not None:
        script_path = Path(mock_script)
        if not script_path.is_file():
            raise ConfigError(f"mock script not found: {script_path}")

        def factory() -> dict[str, Provider]:
            provider = MockProvider.from_file(str(script_path))
            return {role: provider for role in PROVIDER_ROLES}

        return factory

    providers: dict[str, Provider] = {}
    for role in PROVIDER_ROLES:
        settings = cfg.provider_for(role)
        if settings.kind == "mock":
            raise ConfigError(
                f"provider role {role} is 'mock' but no --mock <script> was given"
            )
        # Credential env vars are resolved here, at startup.
        providers[role] = HttpChatProvider(
            settings.endpoint,
            settings.model,
            settings.api_key_env,
            settings.timeout,
        )
    return lambda: dict(providers)


def _build_deps(
    cfg: RunConfig,
    pipeline: Pipeline,
    mock_script: str | None,
    no_online: bool,
    mode_override: str | None,
) -> EvalDeps:
    mode = Mode(mode_override or cfg.mode)
    exemplar = cfg.exemplar_file or None
    if mode is Mode.FEW_SHOT and not exemplar:
        raise ConfigError(
            "few-shot mode requires an exemplar file: set exemplar_file in the config "
            "or rerun with --mode zero-shot"
        )
    heuristics = (
        load_heuristic_config(cfg.heuristics_file) if cfg.heuristics_file else HeuristicConfig()
    )
    engine = None
    if pipeline is not Pipeline.LLM_DEBATE:
        engine = _load_engine(cfg, online_enabled=cfg.online.enabled and not no_online)
    retries = cfg.provider_for("expert_a").retries
    return EvalDeps(
        provider_factory=_provider_factory(cfg, mock_script),
        engine=engine,
        heuristics=heuristics,
        mode=mode,
        exemplar_path=exemplar,
        score_mode=ScoreMode(cfg.score_mode),
        concurrency=cfg.concurrency,
        retries=retries,
        backoff=0.0 if mock_script is not None else 0.5,
        config_snapshot={
            "config": cfg.to_dict(),
            "overrides": {
                "pipeline": pipeline.value,
                "mode": mode.value,
                "mock": mock_script is not None,
                "no_online": no_online,
            },
        },
    )


@cli.command("build-kb")
@click.option("--config", "config_path", type=click.Path(), default=None, help="Run config JSON.")
@click.option("--mayo", "mayo_dir", type=click.Path(), default=None, help="Mayo input directory.")
@click.option("--webmd", "webmd_dir", type=click.Path(), default=None, help="WebMD input directory.")
@click.option("--out", "out_dir", type=click.Path(), default=None, help="Knowledge-base root.")
@click.option("--force", is_flag=True, help="Overwrite existing collections.")
def cmd_build_kb(
    config_path: str | None,
    mayo_dir: str | None,
    webmd_dir: str | None,
    out_dir: str | None,
    force: bool,
) -> None:
    """Ingest source documents, chunk them, embed them, and persist the kb."""
    cfg = _load_config(config_path)
    kb_root = Path(out_dir or cfg.kb_root)
    inputs = {
        Source.MAYO: mayo_dir or cfg.mayo_input,
        Source.WEBMD: webmd_dir or cfg.webmd_input,
    }
    inputs = {src: path for src, path in inputs.items() if path}
    if not inputs:
        raise ConfigError("no input directories: pass --mayo/--webmd or set them in the config")

    for source in inputs:
        target = kb_root / _COLLECTION_NAMES[source]
        if target.exists() and not force:
            raise ConfigError(f"collection already exists: {target} (use --force to rebuild)")

    embed_client = _embed_client(cfg.embedder)
    for source, input_dir in inputs.items():
        name = _COLLECTION_NAMES[source]
        collection = ingest_collection(input_dir, source, cfg.chunking, name=name)
        out_path = save_collection(collection, kb_root)
        index = DenseIndex.build(collection, embed_client.embed)
        np.save(out_path / EMBEDDINGS_FILE, index.matrix)
        (out_path / EMBEDDING_META_FILE).write_text(
            json.dumps(
                {"dim": index.dim, "kind": cfg.embedder.kind, "chunks": len(collection)},
                sort_keys=True,
                indent=2,
            )
            + "\n",
            encoding="utf-8",
        )
        stats = collection.stats
        click.echo(
            f"{name}: {stats['chunk_count']} chunks, ~{stats['token_estimate']} tokens, "
            f"embedded at dim {index.dim} -> {out_path}"
        )


@cli.command("classify")
@click.option("--config", "config_path", type=click.Path(), default=None)
@click.option("--note", "note_file", type=click.Path(), default=None, help="Note text file.")
@click.option("--text", "note_text", default=None, help="Inline note text.")
@click.option("--id", "note_id", default="note", help="Identifier for output files.")
@click.option("--pipeline", type=click.Choice(_PIPELINE_CHOICES), default=Pipeline.BLUEMED.value)
@click.option("--mode", type=click.Choice(_MODE_CHOICES), default=None)
@click.option("--mock", "mock_script", type=click.Path(), default=None, help="Mock provider script.")
@click.option("--no-online", is_flag=True, help="Disable online retrieval.")
@click.option("--out", "out_dir", type=click.Path(), default=None)
def cmd_classify(
    config_path: str | None,
    note_file: str | None,
    note_text: str | None,
    note_id: str,
    pipeline: str,
    mode: str | None,
    mock_script: str | None,
    no_online: bool,
    out_dir: str | None,
) -> None:
    """Classify one clinical note and write its transcript."""
    if (note_file is None) == (note_text is None):
        raise ConfigError("provide exactly one of --note <file> or --text <note text>")
    if note_file is not None:
        path = Path(note_file)
        if not path.is_file():
            raise ConfigError(f"note file not found: {path}")
        note_text = path.read_text(encoding="utf-8")
    assert note_text is not None
    cfg = _load_config(config_path)
    chosen = Pipeline(pipeline)
    deps = _build_deps(cfg, chosen, mock_script, no_online, mode)

    case = classify_note(note_text, note_id, chosen, deps)

    click.echo(f"final label: {case.final_label.value}")
    verdict = case.record.get("verdict")
    if verdict:
        click.echo(
            f"judge: {verdict['answer']} (confidence {verdict['confidence']}, "
            f"winner {verdict['winner']})"
        )
    safety = case.record.get("safety")
    if safety:
        fired = ", ".join(f["rule"] for f in safety["fired_rules"]) or "none"
        click.echo(f"safety rules fired: {fired}")
    for warning in case.record.get("warnings", []):
        click.echo(f"warning: {warning}")

    out = Path(out_dir or cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    from bluemed.debate.transcript import dumps_record

    transcript_path = out / f"case_{note_id}.json"
    transcript_path.write_text(dumps_record(case.record), encoding="utf-8")
    click.echo(f"transcript: {transcript_path}")


@cli.command("evaluate")
@click.argument("dataset", type=click.Path())
@click.option("--config", "config_path", type=click.Path(), default=None)
@click.option("--pipeline", type=click.Choice(_PIPELINE_CHOICES), default=Pipeline.BLUEMED.value)
@click.option("--mode", type=click.Choice(_MODE_CHOICES), default=None)
@click.option("--runs", type=int, default=None, help="Repetitions to average (default from config).")
@click.option("--mock", "mock_script", type=click.Path(), default=None, help="Mock provider script.")
@click.option("--no-online", is_flag=True, help="Disable online retrieval.")
@click.option("--out", "out_dir", type=click.Path(), default=None)
def cmd_evaluate(
    dataset: str,
    config_path: str | None,
    pipeline: str,
    mode: str | None,
    runs: int | None,
    mock_script: str | None,
    no_online: bool,
    out_dir: str | None,
) -> None:
    """Evaluate a pipeline over a dataset and report averaged metrics."""
    cfg = _load_config(config_path)
    chosen = Pipeline(pipeline)
    records = load_dataset(dataset, echo=click.echo)
    deps = _build_deps(cfg, chosen, mock_script, no_online, mode)
    n_runs = runs if runs is not None else cfg.runs
    out = Path(out_dir or cfg.out_dir)

    report = run_evaluation(records, chosen, deps, runs=n_runs, out_dir=out)

    averaged = _report_from_record(report["averaged"])
    click.echo(REPORT_HEADER)
    click.echo(format_report_row(f"{chosen.value}/{deps.mode.value}", averaged))
    if report["excluded_total"]:
        click.echo(f"excluded notes across runs: {report['excluded_total']}")
    click.echo(f"report: {out / 'report.json'}")


def _report_from_record(record: dict) -> MetricsReport:
    confusion = record["confusion"]
    return MetricsReport(
        accuracy=record["accuracy"],
        precision=record["precision"],
        recall=record["recall"],
        f1=record["f1"],
        roc_auc=record["roc_auc"],
        pr_auc=record["pr_auc"],
        confusion=(confusion["TP"], confusion["FP"], confusion["TN"], confusion["FN"]),
        runs_averaged=record["runs_averaged"],
        warnings=tuple(record["warnings"]),
    )


def _summarize_transcript(record: dict) -> dict:
    summary: dict = {
        "schema_version": record.get("schema_version"),
        "note_id": record.get("note_id"),
        "pipeline": record.get("pipeline"),
        "mode": record.get("mode"),
        "final_label": record.get("final_label"),
    }
    summary["sub_queries"] = [sq["text"] for sq in record.get("sub_queries", [])]
    evidence = record.get("evidence", {})
    summary["evidence_ids"] = {
        expert: [e["chunk_id"] for e in rows] for expert, rows in evidence.items()
    }
    args = record.get("arguments")
    if args is None and "argument" in record:
        args = [record["argument"]]
    summary["arguments"] = [
        {
            "expert": a["expert"],
            "round": a["round"],
            "label": a["label"],
            "wrong_term": a.get("wrong_term"),
            "correct_term": a.get("correct_term"),
            "confidence": a.get("confidence"),
        }
        for a in (args or [])
    ]
    if record.get("consensus") is not None:
        summary["consensus"] = record["consensus"]
    if record.get("cross_evidence"):
        summary["cross_evidence_ids"] = record["cross_evidence"]
    if record.get("verdict") is not None:
        summary["verdict"] = record["verdict"]
    if record.get("safety") is not None:
        summary["safety"] = {
            "input_label": record["safety"]["input_label"],
            "final_label": record["safety"]["final_label"],
            "fired_rules": [f["rule"] for f in record["safety"]["fired_rules"]],
            "override_chain": record["safety"]["override_chain"],
        }
    if record.get("usage") is not None:
        summary["usage_totals"] = record["usage"]["totals"]
    summary["warnings"] = record.get("warnings", [])
    return summary


@cli.command("inspect")
@click.argument("transcript", type=click.Path())
@click.option("--json", "as_json", is_flag=True, help="Machine-readable summary.")
def cmd_inspect(transcript: str, as_json: bool) -> None:
    """Render a readable summary of a per-note transcript file."""
    from bluemed.debate.transcript import load_transcript

    record = load_transcript(transcript)
    summary = _summarize_transcript(record)
    if as_json:
        click.echo(json.dumps(summary, sort_keys=True, indent=2))
        return

    click.echo(f"note {summary['note_id']}  pipeline={summary.get('pipeline')} "
               f"mode={summary.get('mode')}  final={summary.get('final_label')}")
    if summary["sub_queries"]:
        click.echo("sub-queries:")
        for text in summary["sub_queries"]:
            click.echo(f"  - {text}")
    for expert, ids in summary["evidence_ids"].items():
        click.echo(f"evidence {expert}: {', '.join(ids) if ids else '(none)'}")
    for arg in summary["arguments"]:
        terms = ""
        if arg["wrong_term"] or arg["correct_term"]:
            terms = f"  [{arg['wrong_term']} -> {arg['correct_term']}]"
        conf = f"  confidence={arg['confidence']}" if arg["confidence"] is not None else ""
        click.echo(f"argument {arg['expert']} r{arg['round']}: {arg['label']}{terms}{conf}")
    if "consensus" in summary:
        c = summary["consensus"]
        click.echo(f"consensus: {'reached' if c['reached'] else 'not reached'} ({c['reason']})")
    if "cross_evidence_ids" in summary:
        for source, ids in summary["cross_evidence_ids"].items():
            click.echo(f"cross evidence {source}: {', '.join(ids) if ids else '(none)'}")
    if "verdict" in summary:
        v = summary["verdict"]
        click.echo(
            f"verdict: {v['answer']} (confidence {v['confidence']}, winner {v['winner']})"
        )
    if "safety" in summary:
        s = summary["safety"]
        chain = " then ".join(
            f"{step['rule']} {step['from']}->{step['to']}" for step in s["override_chain"]
        )
        click.echo(
            f"safety: {s['input_label']} -> {s['final_label']}"
            + (f"  fired: {', '.join(s['fired_rules'])}" if s["fired_rules"] else "")
            + (f"  chain: {chain}" if chain else "")
        )
    if "usage_totals" in summary:
        u = summary["usage_totals"]
        click.echo(
            f"usage: {u['calls']} calls, {u['input_tokens']} in / {u['output_tokens']} out tokens"
        )
    for warning in summary["warnings"]:
        click.echo(f"warning: {warning}")


def main(argv: list[str] | None = None) -> int:
    try:
        cli.main(args=argv, standalone_mode=False)
    except click.exceptions.Exit as exc:
        return int(exc.exit_code)
    except click.Abort:
        click.echo("aborted", err=True)
        return 1
    except click.ClickException as exc:
        exc.show()
        return 1
    except PromptError as exc:
        click.echo(f"error: {exc}", err=True)
        click.echo(
            "hint: few-shot mode needs exemplar_file in the config; "
            "or rerun with --mode zero-shot",
            err=True,
        )
        return 1
    except _USAGE_ERRORS as exc:
        click.echo(f"error: {exc}", err=True)
        return 1
    except BluemedError as exc:
        click.echo(f"pipeline failure: {exc}", err=True)
        return 2
    except Exception as exc:  # noqa: BLE001 - last-resort CLI guard
        click.echo(f"pipeline failure: {type(exc).__name__}: {exc}", err=True)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
