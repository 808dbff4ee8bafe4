"""CLI behavior: kb building, classification, evaluation, inspection."""

import json
from pathlib import Path

import pytest

from bluemed.cli import main
from tests.conftest import FIXTURES

MOCK = str(FIXTURES / "mock_script.json")
DATASET = str(FIXTURES / "dataset.csv")


@pytest.fixture(scope="module")
def kb_root(tmp_path_factory):
    root = tmp_path_factory.mktemp("kb")
    code = main(
        [
            "build-kb",
            "--mayo", str(FIXTURES / "kb_src" / "mayo"),
            "--webmd", str(FIXTURES / "kb_src" / "webmd"),
            "--out", str(root),
        ]
    )
    assert code == 0
    return root


@pytest.fixture(scope="module")
def config_file(kb_root, tmp_path_factory):
    out = tmp_path_factory.mktemp("cfg")
    payload = {
        "kb_root": str(kb_root),
        "mayo_input": str(FIXTURES / "kb_src" / "mayo"),
        "webmd_input": str(FIXTURES / "kb_src" / "webmd"),
        "embedder": {"kind": "mock", "dim": 64},
        "online": {"enabled": False, "fixture": str(FIXTURES / "online_fixture.json")},
        "exemplar_file": str(FIXTURES / "exemplars.txt"),
        "heuristics_file": str(FIXTURES / "heuristics.txt"),
        "out_dir": str(out / "default_out"),
        "runs": 2,
    }
    path = out / "config.json"
    path.write_text(json.dumps(payload, indent=2), encoding="utf-8")
    return str(path)


def test_build_kb_outputs(kb_root, capsys):
    for name in ("mayo", "webmd"):
        assert (kb_root / name / "embeddings.npy").is_file()
        meta = json.loads((kb_root / name / "embedding_meta.json").read_text(encoding="utf-8"))
        assert meta["dim"] == 64
        assert meta["chunks"] > 0


def test_build_kb_refuses_overwrite(kb_root, capsys):
    code = main(
        ["build-kb", "--mayo", str(FIXTURES / "kb_src" / "mayo"), "--out", str(kb_root)]
    )
    assert code == 1
    err = capsys.readouterr().err
    assert "already exists" in err
    assert "--force" in err


def test_build_kb_force_rebuilds(tmp_path, capsys):
    out = tmp_path / "kb"
    args = ["build-kb", "--mayo", str(FIXTURES / "kb_src" / "mayo"), "--out", str(out)]
    assert main(args) == 0
    assert main(args + ["--force"]) == 0
    assert "mayo:" in capsys.readouterr().out


def test_build_kb_requires_inputs(capsys):
    assert main(["build-kb"]) == 1
    assert "no input directories" in capsys.readouterr().err


def test_build_kb_missing_dir(tmp_path, capsys):
    missing = tmp_path / "nope"
    code = main(["build-kb", "--mayo", str(missing), "--out", str(tmp_path / "kb")])
    assert code == 1
    assert "nope" in capsys.readouterr().err


def test_classify_inline_text(config_file, fixture_notes, tmp_path, capsys):
    code = main(
        [
            "classify", "--config", config_file, "--text", fixture_notes["n1"],
            "--id", "n1", "--mock", MOCK, "--out", str(tmp_path),
        ]
    )
    out = capsys.readouterr().out
    assert code == 0
    assert "final label: INCORRECT" in out
    assert "judge: INCORRECT" in out
    assert "safety rules fired: consensus_override" in out
    transcript = json.loads((tmp_path / "case_n1.json").read_text(encoding="utf-8"))
    assert transcript["final_label"] == "INCORRECT"
    assert transcript["pipeline"] == "bluemed"


def test_classify_note_file(config_file, fixture_notes, tmp_path, capsys):
    note_path = tmp_path / "note.txt"
    note_path.write_text(fixture_notes["n2"], encoding="utf-8")
    code = main(
        [
            "classify", "--config", config_file, "--note", str(note_path),
            "--id", "n2", "--mock", MOCK, "--out", str(tmp_path),
        ]
    )
    assert code == 0
    out = capsys.readouterr().out
    assert "final label: CORRECT" in out
    assert (tmp_path / "case_n2.json").is_file()


def test_classify_requires_exactly_one_input_form(config_file, capsys):
    assert main(["classify", "--config", config_file, "--mock", MOCK]) == 1
    assert "exactly one" in capsys.readouterr().err
    assert (
        main(
            [
                "classify", "--config", config_file, "--mock", MOCK,
                "--text", "x", "--note", "y.txt",
            ]
        )
        == 1
    )


def test_classify_missing_note_file(config_file, tmp_path, capsys):
    code = main(
        ["classify", "--config", config_file, "--mock", MOCK, "--note", str(tmp_path / "no.txt")]
    )
    assert code == 1
    assert "note file not found" in capsys.readouterr().err


def test_classify_few_shot_without_exemplar_hints_remedy(kb_root, tmp_path, capsys):
    bare = tmp_path / "bare.json"
    bare.write_text(json.dumps({"kb_root": str(kb_root)}), encoding="utf-8")
    code = main(
        [
            "classify", "--config", str(bare), "--mock", MOCK,
            "--text", "x", "--mode", "few-shot",
        ]
    )
    assert code == 1
    err = capsys.readouterr().err
    assert "exemplar" in err
    assert "zero-shot" in err


def test_classify_few_shot_with_exemplar(config_file, fixture_notes, tmp_path, capsys):
    code = main(
        [
            "classify", "--config", config_file, "--text", fixture_notes["n2"],
            "--id", "n2", "--mode", "few-shot", "--mock", MOCK, "--out", str(tmp_path),
        ]
    )
    assert code == 0
    assert "final label: CORRECT" in capsys.readouterr().out


def test_classify_unscripted_note_is_pipeline_failure(config_file, tmp_path, capsys):
    code = main(
        [
            "classify", "--config", config_file, "--mock", MOCK,
            "--text", "An unscripted note about nothing.", "--out", str(tmp_path),
        ]
    )
    assert code == 2
    assert "pipeline failure" in capsys.readouterr().err


def test_classify_invalid_pipeline_choice(config_file, capsys):
    code = main(
        ["classify", "--config", config_file, "--mock", MOCK, "--text", "x", "--pipeline", "oracle"]
    )
    assert code == 1


def test_evaluate_end_to_end(config_file, tmp_path, capsys):
    out = tmp_path / "eval"
    code = main(
        [
            "evaluate", DATASET, "--config", config_file,
            "--mock", MOCK, "--out", str(out),
        ]
    )
    assert code == 0
    stdout = capsys.readouterr().out
    assert "notes: 6 (3 INCORRECT / 3 CORRECT)" in stdout
    assert "bluemed/zero-shot" in stdout
    assert "83.33" in stdout

    report = json.loads((out / "report.json").read_text(encoding="utf-8"))
    averaged = report["averaged"]
    assert averaged["accuracy"] == pytest.approx(83.33, abs=0.01)
    assert averaged["f1"] == pytest.approx(80.0, abs=0.01)
    assert averaged["precision"] == pytest.approx(100.0)
    assert averaged["recall"] == pytest.approx(66.67, abs=0.01)
    assert averaged["roc_auc"] == pytest.approx(88.89, abs=0.01)
    assert averaged["pr_auc"] == pytest.approx(91.67, abs=0.01)
    assert report["excluded_total"] == 0
    assert [r["safety_overrides"] for r in report["per_run"]] == [3, 3]

    # Two scripted runs inside one invocation are byte-identical.
    for i in ("n1", "n2", "n3", "n4", "n5", "n6"):
        a = (out / "run1" / f"case_{i}.json").read_bytes()
        b = (out / "run2" / f"case_{i}.json").read_bytes()
        assert a == b


def test_evaluate_repeat_invocations_identical(config_file, tmp_path, capsys):
    outs = []
    for name in ("a", "b"):
        out = tmp_path / name
        assert (
            main(
                [
                    "evaluate", DATASET, "--config", config_file,
                    "--mock", MOCK, "--out", str(out),
                ]
            )
            == 0
        )
        outs.append(out)
    capsys.readouterr()
    assert (outs[0] / "report.json").read_bytes() == (outs[1] / "report.json").read_bytes()
    assert (
        (outs[0] / "run1" / "case_n5.json").read_bytes()
        == (outs[1] / "run1" / "case_n5.json").read_bytes()
    )


def test_evaluate_rag_baseline(config_file, tmp_path, capsys):
    out = tmp_path / "rag"
    code = main(
        [
            "evaluate", DATASET, "--config", config_file, "--pipeline", "rag-single-mayo",
            "--mock", MOCK, "--out", str(out), "--runs", "1",
        ]
    )
    assert code == 0
    stdout = capsys.readouterr().out
    assert "rag-single-mayo/zero-shot" in stdout
    report = json.loads((out / "report.json").read_text(encoding="utf-8"))
    assert report["averaged"]["accuracy"] == pytest.approx(66.67, abs=0.01)
    case = json.loads((out / "run1" / "case_n1.json").read_text(encoding="utf-8"))
    assert "verdict" not in case
    assert "safety" not in case
    assert case["argument"]["expert"] == "A"


def test_evaluate_missing_dataset(config_file, tmp_path, capsys):
    code = main(
        ["evaluate", str(tmp_path / "no.csv"), "--config", config_file, "--mock", MOCK]
    )
    assert code == 1
    assert "not found" in capsys.readouterr().err


def test_inspect_transcript(config_file, tmp_path, capsys):
    out = tmp_path / "eval"
    assert (
        main(
            [
                "evaluate", DATASET, "--config", config_file,
                "--mock", MOCK, "--out", str(out), "--runs", "1",
            ]
        )
        == 0
    )
    capsys.readouterr()
    case_path = out / "run1" / "case_n4.json"
    assert main(["inspect", str(case_path)]) == 0
    text = capsys.readouterr().out
    assert "note n4" in text
    assert "verdict: INCORRECT" in text
    assert "two_term_rule" in text
    assert "INCORRECT->CORRECT" in text

    assert main(["inspect", str(case_path), "--json"]) == 0
    summary = json.loads(capsys.readouterr().out)
    assert summary["note_id"] == "n4"
    assert summary["final_label"] == "CORRECT"
    assert summary["safety"]["fired_rules"] == ["two_term_rule"]


def test_inspect_missing_file(tmp_path, capsys):
    assert main(["inspect", str(tmp_path / "no.json")]) == 1
    assert "error:" in capsys.readouterr().err


def test_no_command_shows_usage(capsys):
    code = main([])
    assert code in (0, 1)
