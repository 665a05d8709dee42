"""ASAP++-shaped TSV ingestion with row-level error collection."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

from ..core import Essay, TraitId, traits_for_prompt
from ..errors import DomainError
from .config import DEFAULT_COLUMNS, PipelineConfig

__all__ = ["RowError", "IngestReport", "ingest_asap"]


@dataclass(frozen=True)
class RowError:
    row: int
    essay_id: str
    reason: str


@dataclass
class IngestReport:
    essays: list[Essay] = field(default_factory=list)
    errors: list[RowError] = field(default_factory=list)
    per_prompt: dict[int, int] = field(default_factory=dict)

    def summary(self) -> str:
        parts = [f"prompt {p}: {n}" for p, n in sorted(self.per_prompt.items())]
        return (
            f"{len(self.essays)} essay(s) ingested ({', '.join(parts)}); "
            f"{len(self.errors)} row(s) rejected"
        )


def _parse_int(value: str, what: str) -> int:
    text = value.strip()
    try:
        return int(text)
    except ValueError:
        pass
    # Trait annotations are integer-valued; a fractional score is a data
    # problem to surface, not something to round away.
    try:
        as_float = float(text)
    except ValueError:
        raise ValueError(f"{what} {value!r} is not a number") from None
    if as_float != int(as_float):
        raise ValueError(f"{what} {value!r} is not an integer")
    return int(as_float)


def ingest_asap(
    path: str | Path, config: PipelineConfig | None = None
) -> IngestReport:
    """Read a tab-separated corpus into validated essays.

    Column names come from the pipeline config (``columns``); trait columns
    absent from the header are simply not ingested. Invalid rows (unknown
    prompt, out-of-range or non-integer score, empty text) are collected
    into the report instead of aborting the run.
    """
    columns = dict(config.columns) if config else dict(DEFAULT_COLUMNS)
    report = IngestReport()
    with Path(path).open("r", encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh, delimiter="\t")
        if reader.fieldnames is None:
            return report
        trait_columns = {
            trait: columns[trait.value]
            for trait in TraitId
            if columns.get(trait.value) in reader.fieldnames
        }
        for row_number, row in enumerate(reader, start=2):
            essay_id = (row.get(columns["essay_id"]) or "").strip()
            try:
                prompt_id = _parse_int(row.get(columns["prompt_id"]) or "", "prompt id")
                valid_traits = traits_for_prompt(prompt_id)
                scores: dict[TraitId, int] = {}
                for trait, column in trait_columns.items():
                    raw = (row.get(column) or "").strip()
                    if raw == "":
                        continue
                    if trait not in valid_traits:
                        continue  # other prompts' trait columns are blank here
                    scores[trait] = _parse_int(raw, f"{trait.value} score")
                excerpt = (row.get(columns.get("excerpt", "")) or "").strip() or None
                essay = Essay(
                    essay_id=essay_id or f"row{row_number}",
                    prompt_id=prompt_id,
                    text=row.get(columns["text"]) or "",
                    excerpt=excerpt,
                    human_scores=scores,
                )
            except (DomainError, ValueError) as exc:
                report.errors.append(
                    RowError(row=row_number, essay_id=essay_id, reason=str(exc))
                )
                continue
            report.essays.append(essay)
            report.per_prompt[prompt_id] = report.per_prompt.get(prompt_id, 0) + 1
    return report
