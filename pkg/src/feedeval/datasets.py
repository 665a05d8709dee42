"""Builders for the evaluator-training datasets and JSONL emission.

Three source adapters (iterative-revision logs, ranked-feedback collections,
and revised human feedback) feed the helpfulness pairwise dataset; rubric
score descriptions paired with feedback feed the validity NLI dataset.
Builders are pure functions of their inputs plus an explicit seed, so
re-runs are byte-identical.
"""

from __future__ import annotations

import hashlib
import json
import logging
import random
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any, Iterable, Mapping, Sequence

from .errors import DomainError, EmissionError, IngestionError
from .losses import NliLabel

logger = logging.getLogger(__name__)

__all__ = [
    "PairSource",
    "PreferencePair",
    "NliExample",
    "WriteReport",
    "build_helpfulness_pairs",
    "build_validity_nli",
    "emit_jsonl",
    "preference_record",
    "nli_record",
    "read_jsonl",
    "read_tsv",
    "apply_field_map",
]


class PairSource(str, Enum):
    SPEC_EVAL = "speceval"
    RECIPE4U = "recipe4u"
    FEAT = "feat"
    ASAP_REVISED = "asap_revised"


@dataclass(frozen=True)
class PreferencePair:
    """A chosen/rejected feedback pair for reward-model training."""

    source: PairSource
    context: str
    chosen: str
    rejected: str
    meta: Mapping[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if not self.chosen.strip() or not self.rejected.strip():
            raise DomainError("chosen and rejected feedback must both be non-empty")
        if self.chosen == self.rejected:
            raise DomainError("chosen and rejected feedback must differ")


@dataclass(frozen=True)
class NliExample:
    """Rubric-description premise paired with a feedback hypothesis."""

    premise: str
    hypothesis: str
    label: NliLabel
    evaluated_level: int
    premise_level: int

    def __post_init__(self) -> None:
        matches = self.premise_level == self.evaluated_level
        if (self.label is NliLabel.ENTAILMENT) != matches:
            raise DomainError(
                f"label {self.label.value} inconsistent with premise_level="
                f"{self.premise_level}, evaluated_level={self.evaluated_level}"
            )


def _record_id(record: Mapping[str, Any], index: int) -> str:
    return str(record.get("id", index))


def _require(record: Mapping[str, Any], keys: Sequence[str]) -> list[str]:
    return [k for k in keys if not record.get(k)]


def _recipe4u_pairs(record: Mapping[str, Any], rid: str) -> list[PreferencePair]:
    rejected = record["rejected"]
    if isinstance(rejected, str):
        rejected = [rejected]
    pairs = []
    for alt in rejected:
        if not str(alt).strip() or str(alt) == str(record["accepted"]):
            continue
        pairs.append(
            PreferencePair(
                source=PairSource.RECIPE4U,
                context=str(record["context"]),
                chosen=str(record["accepted"]),
                rejected=str(alt),
                meta={"record_id": rid},
            )
        )
    return pairs


def _feat_pairs(
    record: Mapping[str, Any], rid: str, adjacent_only: bool
) -> list[PreferencePair]:
    items = sorted(
        ({"text": str(i["text"]), "rank": int(i["rank"])} for i in record["items"]),
        key=lambda i: i["rank"],
    )
    pairs = []
    for i, better in enumerate(items):
        for worse in items[i + 1 :]:
            if worse["rank"] == better["rank"]:
                continue  # tied ranks carry no ordering signal
            if adjacent_only and worse["rank"] != better["rank"] + 1:
                continue
            if better["text"] == worse["text"]:
                continue
            pairs.append(
                PreferencePair(
                    source=PairSource.FEAT,
                    context=str(record["context"]),
                    chosen=better["text"],
                    rejected=worse["text"],
                    meta={
                        "record_id": rid,
                        "chosen_rank": better["rank"],
                        "rejected_rank": worse["rank"],
                    },
                )
            )
    return pairs


def _asap_revised_pairs(record: Mapping[str, Any], rid: str) -> list[PreferencePair]:
    return [
        PreferencePair(
            source=PairSource.ASAP_REVISED,
            context=str(record["context"]),
            chosen=str(record["revised"]),
            rejected=str(record["original"]),
            meta={"record_id": rid},
        )
    ]


_ADAPTER_FIELDS = {
    PairSource.RECIPE4U: ("context", "accepted", "rejected"),
    PairSource.FEAT: ("context", "items"),
    PairSource.ASAP_REVISED: ("context", "original", "revised"),
}


def build_helpfulness_pairs(
    records: Iterable[Mapping[str, Any]],
    adjacent_only: bool = False,
) -> list[PreferencePair]:
    """Turn source-tagged rows into chosen/rejected helpfulness pairs.

    Accepted sources and their required fields:

    * ``recipe4u``: ``context``, ``accepted``, ``rejected`` (string or list);
      the accepted feedback is chosen against each not-adopted alternative.
    * ``feat``: ``context``, ``items`` (each ``{text, rank}``, rank 1 best);
      every higher/lower rank combination becomes a pair, or only adjacent
      ranks when ``adjacent_only`` is set.
    * ``asap_revised``: ``context``, ``original``, ``revised``; the revised
      feedback is chosen over the original.

    Records missing required fields are skipped with a logged reason; rows
    that are not source-tagged mappings raise ``IngestionError``. Exact
    (context, chosen, rejected) duplicates are dropped and counted.
    """
    pairs: list[PreferencePair] = []
    skipped = 0
    for index, record in enumerate(records):
        if not isinstance(record, Mapping) or "source" not in record:
            raise IngestionError(f"record {index} is not a source-tagged mapping")
        try:
            source = PairSource(str(record["source"]).lower())
        except ValueError:
            raise IngestionError(
                f"record {index} has unknown source {record['source']!r}"
            ) from None
        if source is PairSource.SPEC_EVAL:
            raise IngestionError(
                "speceval pairs are produced by the specificity pipeline, "
                "not the helpfulness builder"
            )
        rid = _record_id(record, index)
        missing = _require(record, _ADAPTER_FIELDS[source])
        if missing:
            logger.warning(
                "skipping %s record %s: missing field(s) %s",
                source.value,
                rid,
                ", ".join(missing),
            )
            skipped += 1
            continue
        try:
            if source is PairSource.RECIPE4U:
                pairs.extend(_recipe4u_pairs(record, rid))
            elif source is PairSource.FEAT:
                pairs.extend(_feat_pairs(record, rid, adjacent_only))
            else:
                pairs.extend(_asap_revised_pairs(record, rid))
        except (KeyError, TypeError, ValueError, DomainError) as exc:
            raise IngestionError(f"malformed {source.value} record {rid}: {exc}") from exc

    pairs.sort(key=lambda p: (p.source.value, str(p.meta.get("record_id", ""))))
    seen: set[tuple[str, str, str]] = set()
    unique: list[PreferencePair] = []
    for pair in pairs:
        key = (pair.context, pair.chosen, pair.rejected)
        if key in seen:
            continue
        seen.add(key)
        unique.append(pair)
    dropped = len(pairs) - len(unique)
    if dropped:
        logger.info("dropped %d duplicate preference pair(s)", dropped)
    if skipped:
        logger.info("skipped %d record(s) missing adapter fields", skipped)
    return unique


def build_validity_nli(
    records: Iterable[Mapping[str, Any]],
    rng: random.Random,
) -> list[NliExample]:
    """Build entailment/contradiction examples from rubric-scored feedback rows.

    Each record needs ``rubric_levels`` (level -> description), an
    ``evaluated_level`` present among them, and ``feedback``. Every usable
    record yields exactly two examples: an entailment at the evaluated level
    and a contradiction at a level drawn uniformly from the others via
    ``rng``. Single-level rubrics are skipped with a logged reason.
    """
    examples: list[NliExample] = []
    for index, record in enumerate(records):
        rid = _record_id(record, index)
        missing = _require(record, ("rubric_levels", "feedback"))
        if missing or "evaluated_level" not in record:
            logger.warning("skipping validity record %s: missing fields", rid)
            continue
        try:
            levels = {int(k): str(v) for k, v in record["rubric_levels"].items()}
            evaluated = int(record["evaluated_level"])
            feedback = str(record["feedback"])
        except (TypeError, ValueError, AttributeError) as exc:
            raise IngestionError(f"malformed validity record {rid}: {exc}") from exc
        if evaluated not in levels:
            logger.warning(
                "skipping validity record %s: evaluated level %d has no description",
                rid,
                evaluated,
            )
            continue
        alternatives = sorted(k for k in levels if k != evaluated)
        if not alternatives:
            logger.warning("skipping validity record %s: single-level rubric", rid)
            continue
        contradiction_level = rng.choice(alternatives)
        examples.append(
            NliExample(
                premise=levels[evaluated],
                hypothesis=feedback,
                label=NliLabel.ENTAILMENT,
                evaluated_level=evaluated,
                premise_level=evaluated,
            )
        )
        examples.append(
            NliExample(
                premise=levels[contradiction_level],
                hypothesis=feedback,
                label=NliLabel.CONTRADICTION,
                evaluated_level=evaluated,
                premise_level=contradiction_level,
            )
        )
    return examples


def preference_record(pair: PreferencePair) -> dict[str, Any]:
    return {
        "source": pair.source.value,
        "context": pair.context,
        "chosen": pair.chosen,
        "rejected": pair.rejected,
        "meta": dict(pair.meta),
    }


def nli_record(example: NliExample) -> dict[str, Any]:
    return {
        "premise": example.premise,
        "hypothesis": example.hypothesis,
        "label": example.label.value,
        "evaluated_level": example.evaluated_level,
        "premise_level": example.premise_level,
    }


@dataclass(frozen=True)
class WriteReport:
    path: str
    schema_tag: str
    count: int
    bytes_written: int
    sha256: str


def emit_jsonl(
    items: Iterable[Mapping[str, Any]],
    path: str | Path,
    schema_tag: str,
) -> WriteReport:
    """Write records as UTF-8 JSONL with LF terminators and stable field order.

    On any I/O failure the partial file is removed before the error is
    re-raised as ``EmissionError``.
    """
    path = Path(path)
    digest = hashlib.sha256()
    count = 0
    written = 0
    try:
        with path.open("wb") as fh:
            for item in items:
                line = json.dumps(item, ensure_ascii=False, separators=(",", ":"))
                data = line.encode("utf-8") + b"\n"
                fh.write(data)
                digest.update(data)
                count += 1
                written += len(data)
    except OSError as exc:
        path.unlink(missing_ok=True)
        raise EmissionError(f"failed writing {path}: {exc}") from exc
    return WriteReport(
        path=str(path),
        schema_tag=schema_tag,
        count=count,
        bytes_written=written,
        sha256=digest.hexdigest(),
    )


def read_jsonl(path: str | Path) -> list[dict[str, Any]]:
    records = []
    with Path(path).open("r", encoding="utf-8") as fh:
        for number, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                records.append(json.loads(line))
            except json.JSONDecodeError as exc:
                raise IngestionError(f"{path}:{number}: invalid JSON: {exc}") from exc
    return records


def read_tsv(path: str | Path) -> list[dict[str, str]]:
    import csv

    with Path(path).open("r", encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh, delimiter="\t")
        if reader.fieldnames is None:
            return []
        return [dict(row) for row in reader]


def apply_field_map(
    record: Mapping[str, Any], field_map: Mapping[str, str]
) -> dict[str, Any]:
    """Rename source fields to the keys a builder expects; unmapped keys pass through."""
    renamed = {dst: record[src] for dst, src in field_map.items() if src in record}
    for key, value in record.items():
        if key not in field_map.values() and key not in renamed:
            renamed[key] = value
    return renamed
