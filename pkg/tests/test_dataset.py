"""Dataset loader validation and summary statistics."""

import pytest

from bluemed.common import Label
from bluemed.errors import DatasetError
from bluemed.evalharness.dataset import (
    ERROR_TYPES,
    EvalRecord,
    dataset_stats,
    format_stats,
    load_dataset,
)

HEADER = "id,text,label,error_type\n"


def write(tmp_path, body, name="data.csv"):
    path = tmp_path / name
    path.write_text(HEADER + body, encoding="utf-8")
    return path


def test_fixture_dataset_loads(fixtures_dir):
    records = load_dataset(fixtures_dir / "dataset.csv")
    assert len(records) == 6
    stats = dataset_stats(records)
    assert stats["notes"] == 6
    assert stats["incorrect"] == 3
    assert stats["correct"] == 3
    typed = {t: n for t, n in stats["error_types"].items() if n}
    assert typed == {"Pharmacotherapy": 1, "Diagnosis": 1, "Management": 1}
    # INCORRECT rows carry an error type; CORRECT rows never do.
    for r in records:
        assert (r.error_type is not None) == (r.gold_label is Label.INCORRECT)


def test_echo_prints_stats(fixtures_dir):
    lines = []
    load_dataset(fixtures_dir / "dataset.csv", echo=lines.append)
    assert lines[0] == "notes: 6 (3 INCORRECT / 3 CORRECT)"
    assert any(line.startswith("mean token estimate:") for line in lines)
    assert any("Pharmacotherapy=1" in line for line in lines)


def test_quoted_fields_with_commas(tmp_path):
    path = write(tmp_path, '"n1","chest pain, radiating to the arm",CORRECT,\n')
    (record,) = load_dataset(path)
    assert record.text == "chest pain, radiating to the arm"
    assert record.error_type is None


def test_error_type_on_correct_rejected(tmp_path):
    path = write(tmp_path, "n1,text,CORRECT,Diagnosis\n")
    with pytest.raises(DatasetError, match=r"data\.csv:2: .*CORRECT label"):
        load_dataset(path)


def test_unknown_error_type_rejected(tmp_path):
    path = write(tmp_path, "n1,text,INCORRECT,Typo\n")
    with pytest.raises(DatasetError, match="unknown error_type"):
        load_dataset(path)


def test_duplicate_id_rejected(tmp_path):
    path = write(tmp_path, "n1,text,CORRECT,\nn1,other,CORRECT,\n")
    with pytest.raises(DatasetError, match=r":3: duplicate id 'n1'"):
        load_dataset(path)


def test_bad_header_rejected(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("id,text,label\nn1,t,CORRECT\n", encoding="utf-8")
    with pytest.raises(DatasetError, match="header must be id,text,label,error_type"):
        load_dataset(path)


def test_invalid_label_names_row(tmp_path):
    path = write(tmp_path, "n1,text,CORRECT,\nn2,text,MAYBE,\n")
    with pytest.raises(DatasetError, match=r":3: invalid label 'MAYBE'"):
        load_dataset(path)


def test_wrong_column_count_names_row(tmp_path):
    path = write(tmp_path, "n1,text only\n")
    with pytest.raises(DatasetError, match=r":2: expected 4 columns, got 2"):
        load_dataset(path)


def test_blank_rows_skipped(tmp_path):
    path = write(tmp_path, "n1,text,CORRECT,\n\n  ,,,\nn2,text,INCORRECT,Diagnosis\n")
    records = load_dataset(path)
    assert [r.note_id for r in records] == ["n1", "n2"]


def test_empty_file_rejected(tmp_path):
    path = tmp_path / "empty.csv"
    path.write_text("", encoding="utf-8")
    with pytest.raises(DatasetError, match="empty file"):
        load_dataset(path)


def test_header_only_rejected(tmp_path):
    path = write(tmp_path, "")
    with pytest.raises(DatasetError, match="no data rows"):
        load_dataset(path)


def test_missing_file_rejected(tmp_path):
    with pytest.raises(DatasetError, match="not found"):
        load_dataset(tmp_path / "absent.csv")


def test_record_validation_direct():
    with pytest.raises(DatasetError, match="non-empty"):
        EvalRecord(note_id="", text="t", gold_label=Label.CORRECT)
    with pytest.raises(DatasetError, match="text must be non-empty"):
        EvalRecord(note_id="n1", text="  ", gold_label=Label.CORRECT)


def test_error_type_vocabulary():
    assert ERROR_TYPES == (
        "Diagnosis", "Management", "Treatment", "Pharmacotherapy", "CausalOrganism"
    )
    for t in ERROR_TYPES:
        EvalRecord(note_id="n", text="t", gold_label=Label.INCORRECT, error_type=t)


def test_format_stats_omits_empty_error_types():
    records = [EvalRecord(note_id="n1", text="t", gold_label=Label.CORRECT)]
    lines = format_stats(dataset_stats(records))
    assert len(lines) == 2
    assert lines[0] == "notes: 1 (0 INCORRECT / 1 CORRECT)"
