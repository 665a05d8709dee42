"""Candidate generation and tolerant parsing of trait-keyed answer documents."""

from __future__ import annotations

import ast
import json
import logging
from dataclasses import dataclass, field
from typing import Mapping, Sequence

from ..core import Essay, FeedbackCandidate, PromptSetting, Rubric, TraitId, traits_for_prompt
from ..errors import ProtocolError
from .backends import FeedbackGenerator

logger = logging.getLogger(__name__)

__all__ = [
    "ParseFailure",
    "GenerationResult",
    "parse_answer_document",
    "parse_score_document",
    "generate_candidates",
]


def _outermost_object(text: str) -> str:
    start = text.find("{")
    end = text.rfind("}")
    if start == -1 or end == -1 or end <= start:
        raise ProtocolError("no brace-delimited object in model answer")
    return text[start : end + 1]


def _loose_load(text: str) -> dict:
    # Models emit JSON-ish objects with either quote style; try strict JSON
    # first, then a Python-literal read.
    candidate = _outermost_object(text)
    try:
        parsed = json.loads(candidate)
    except json.JSONDecodeError:
        try:
            parsed = ast.literal_eval(candidate)
        except (ValueError, SyntaxError) as exc:
            raise ProtocolError(f"unparseable model answer: {exc}") from exc
    if not isinstance(parsed, dict):
        raise ProtocolError("model answer is not an object")
    return parsed


def _keyed_by_trait(parsed: dict, expected: Sequence[TraitId]) -> dict[TraitId, object]:
    by_key = {str(k).strip().lower(): v for k, v in parsed.items()}
    return {trait: by_key[trait.value] for trait in expected if trait.value in by_key}


def parse_answer_document(
    text: str, expected: Sequence[TraitId]
) -> dict[TraitId, str]:
    """Parse one feedback answer document into per-trait feedback strings.

    The outermost brace-delimited object is extracted; single- or
    double-quoted documents both parse. Only the expected traits are kept,
    and a missing or empty trait value simply leaves that trait absent,
    invalidating the sample for that trait alone.
    """
    values = _keyed_by_trait(_loose_load(text), expected)
    return {
        trait: str(value).strip()
        for trait, value in values.items()
        if str(value).strip()
    }


def parse_score_document(
    text: str, expected: Sequence[TraitId]
) -> dict[TraitId, float]:
    """Parse a score answer, accepting bare numbers or {score: ...} objects."""
    values = _keyed_by_trait(_loose_load(text), expected)
    scores: dict[TraitId, float] = {}
    for trait, value in values.items():
        if isinstance(value, Mapping) and "score" in value:
            value = value["score"]
        try:
            scores[trait] = float(value)  # type: ignore[arg-type]
        except (TypeError, ValueError):
            raise ProtocolError(
                f"score for {trait.value!r} is not numeric: {value!r}"
            ) from None
    return scores


@dataclass(frozen=True)
class ParseFailure:
    trait: TraitId
    sample_index: int
    reason: str


@dataclass
class GenerationResult:
    candidates: dict[TraitId, list[FeedbackCandidate]] = field(default_factory=dict)
    failures: list[ParseFailure] = field(default_factory=list)


def generate_candidates(
    essay: Essay,
    setting: PromptSetting,
    n: int,
    temperature: float,
    generator: FeedbackGenerator,
    rubrics: Mapping[TraitId, Rubric] | None = None,
    max_attempts: int = 3,
) -> GenerationResult:
    """Draw ``n`` feedback samples and parse them into per-trait candidates.

    A sample that fails to parse is retried up to ``max_attempts`` times and
    then recorded as a failure for every trait it left uncovered. Candidates
    keep their sample index so audit records stay joinable.
    """
    expected = [t for t in traits_for_prompt(essay.prompt_id) if t is not TraitId.OVERALL]
    result = GenerationResult(candidates={trait: [] for trait in expected})
    for sample_index in range(n):
        parsed: dict[TraitId, str] = {}
        reason = "no parse attempt"
        for attempt in range(1, max_attempts + 1):
            raw = generator.generate(essay, setting, sample_index, temperature, rubrics)
            try:
                parsed = parse_answer_document(raw, expected)
                reason = "missing trait key"
                break
            except ProtocolError as exc:
                reason = str(exc)
                logger.debug(
                    "sample %d attempt %d unparseable: %s", sample_index, attempt, exc
                )
        for trait in expected:
            if trait in parsed:
                result.candidates[trait].append(
                    FeedbackCandidate(
                        essay_id=essay.essay_id,
                        trait=trait,
                        text=parsed[trait],
                        setting=setting,
                        sample_index=sample_index,
                        temperature=temperature,
                    )
                )
            else:
                result.failures.append(
                    ParseFailure(trait=trait, sample_index=sample_index, reason=reason)
                )
    return result
