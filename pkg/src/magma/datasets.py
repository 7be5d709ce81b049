"""Dataset ingestion: one JSONL entry per knowledge point."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

from .errors import ContractViolation, IngestError
from .model import Category, InstructionalInput

DEFAULT_PER_POINT_COUNT = 5


@dataclass(frozen=True)
class DatasetEntry:
    """One knowledge point plus how many questions to generate for it."""

    id: str
    input: InstructionalInput
    per_point_count: int = DEFAULT_PER_POINT_COUNT

    def __post_init__(self) -> None:
        if not self.id.strip():
            raise ContractViolation("entry id must be nonempty")
        if self.per_point_count < 1:
            raise ContractViolation("per_point_count must be >= 1")


def ingest_dataset(path: str | Path) -> list[DatasetEntry]:
    """Parse and validate a JSONL dataset file.

    Raises IngestError naming the offending line on malformed JSON,
    missing fields, unknown categories, or duplicate ids.
    """
    entries: list[DatasetEntry] = []
    seen_ids: set[str] = set()
    with Path(path).open(encoding="utf-8") as handle:
        for line_number, line in enumerate(handle, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                raw = json.loads(line)
            except json.JSONDecodeError as exc:
                raise IngestError(f"invalid JSON: {exc}", line=line_number) from exc
            if not isinstance(raw, dict):
                raise IngestError("entry must be a JSON object", line=line_number)

            entry_id = str(raw.get("id", "")).strip()
            if not entry_id:
                raise IngestError("missing id", line=line_number)
            if entry_id in seen_ids:
                raise IngestError(f"duplicate id {entry_id!r}", line=line_number)
            seen_ids.add(entry_id)

            category_raw = raw.get("category", "")
            try:
                category = Category(category_raw)
            except ValueError:
                raise IngestError(
                    f"unknown category {category_raw!r}", line=line_number
                ) from None

            try:
                input = InstructionalInput(
                    knowledge_point=str(raw.get("knowledge_point", "")),
                    subject_grade=str(raw.get("subject_grade", "")),
                    diagram_requirements=str(raw.get("diagram_requirements", "")),
                    raw_instruction=str(raw.get("raw_instruction", "")),
                    category=category,
                )
                entries.append(
                    DatasetEntry(
                        id=entry_id,
                        input=input,
                        per_point_count=int(raw.get("per_point_count", DEFAULT_PER_POINT_COUNT)),
                    )
                )
            except (ContractViolation, TypeError, ValueError) as exc:
                raise IngestError(str(exc), line=line_number) from exc
    return entries


def dataset_budget(entries: list[DatasetEntry]) -> int:
    """Total number of questions the dataset asks for."""
    return sum(entry.per_point_count for entry in entries)
