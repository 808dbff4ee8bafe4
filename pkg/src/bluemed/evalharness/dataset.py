"""MEDEC-format dataset loading and summary statistics.

Expected file: UTF-8 delimited text with header ``id,text,label,error_type``.
``label`` is CORRECT or INCORRECT; ``error_type`` is one of the five error
categories and may only accompany INCORRECT labels.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

from bluemed.common import Label
from bluemed.errors import DatasetError

ERROR_TYPES = ("Diagnosis", "Management", "Treatment", "Pharmacotherapy", "CausalOrganism")

_EXPECTED_HEADER = ["id", "text", "label", "error_type"]

# Rough chars-per-token divisor used for corpus-level size reporting.
_CHARS_PER_TOKEN = 4


@dataclass(frozen=True)
class EvalRecord:
    note_id: str
    text: str
    gold_label: Label
    error_type: str | None = None

    def __post_init__(self) -> None:
        if not self.note_id:
            raise DatasetError("note_id must be non-empty")
        if not self.text.strip():
            raise DatasetError(f"note {self.note_id}: text must be non-empty")
        if self.error_type is not None:
            if self.error_type not in ERROR_TYPES:
                raise DatasetError(
                    f"note {self.note_id}: unknown error_type {self.error_type!r}"
                )
            if self.gold_label is not Label.INCORRECT:
                raise DatasetError(
                    f"note {self.note_id}: error_type set on a CORRECT label"
                )


def load_dataset(path: str | Path, echo: Callable[[str], None] | None = None) -> list[EvalRecord]:
    """Load and validate records; optionally echo the summary lines."""
    path = Path(path)
    if not path.is_file():
        raise DatasetError(f"dataset file not found: {path}")
    records: list[EvalRecord] = []
    seen: set[str] = set()
    with path.open(encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DatasetError(f"{path}: empty file") from None
        if [h.strip() for h in header] != _EXPECTED_HEADER:
            raise DatasetError(
                f"{path}: header must be {','.join(_EXPECTED_HEADER)}, got {','.join(header)}"
            )
        for row_no, row in enumerate(reader, start=2):
            if not row or all(not cell.strip() for cell in row):
                continue
            if len(row) != len(_EXPECTED_HEADER):
                raise DatasetError(f"{path}:{row_no}: expected 4 columns, got {len(row)}")
            note_id, text, label_text, error_type = (cell.strip() for cell in row)
            if note_id in seen:
                raise DatasetError(f"{path}:{row_no}: duplicate id {note_id!r}")
            seen.add(note_id)
            if label_text not in (Label.CORRECT.value, Label.INCORRECT.value):
                raise DatasetError(f"{path}:{row_no}: invalid label {label_text!r}")
            try:
                records.append(
                    EvalRecord(
                        note_id=note_id,
                        text=text,
                        gold_label=Label(label_text),
                        error_type=error_type or None,
                    )
                )
            except DatasetError as exc:
                raise DatasetError(f"{path}:{row_no}: {exc}") from None
    if not records:
        raise DatasetError(f"{path}: no data rows")
    if echo is not None:
        for line in format_stats(dataset_stats(records)):
            echo(line)
    return records


def dataset_stats(records: list[EvalRecord]) -> dict:
    incorrect = sum(1 for r in records if r.gold_label is Label.INCORRECT)
    by_type = {t: 0 for t in ERROR_TYPES}
    for r in records:
        if r.error_type is not None:
            by_type[r.error_type] += 1
    mean_tokens = sum(len(r.text) for r in records) / len(records) / _CHARS_PER_TOKEN
    return {
        "notes": len(records),
        "incorrect": incorrect,
        "correct": len(records) - incorrect,
        "error_types": by_type,
        "mean_token_estimate": round(mean_tokens, 1),
    }


def format_stats(stats: dict) -> list[str]:
    lines = [
        f"notes: {stats['notes']} ({stats['incorrect']} INCORRECT / {stats['correct']} CORRECT)",
        f"mean token estimate: {stats['mean_token_estimate']}",
    ]
    typed = {t: n for t, n in stats["error_types"].items() if n}
    if typed:
        lines.append(
            "error types: " + ", ".join(f"{t}={n}" for t, n in typed.items())
        )
    return lines
