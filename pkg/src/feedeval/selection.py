"""Per-trait feedback selection.

Every candidate is scored on each quality dimension, scores are softmax-
normalized across the candidate set per dimension, the normalized values are
averaged with equal weight, and the candidate with the highest (or lowest)
average wins. Normalization uses max-subtraction and exact summation so the
selection is invariant to per-dimension score shifts and equivariant under
candidate permutation, bit for bit.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from enum import Enum
from typing import Mapping, Sequence

from .core import Essay, FeedbackCandidate, Rubric, TraitId, traits_for_prompt
from .errors import DomainError, FeedEvalError
from .scorers import Dimension, DimensionScorer, ScoreRequest

__all__ = [
    "SelectionMode",
    "CandidateScores",
    "SelectedFeedback",
    "SelectionError",
    "ALL_DIMENSIONS",
    "normalize",
    "select",
    "select_all",
    "audit_record",
]

ALL_DIMENSIONS: tuple[Dimension, ...] = (
    Dimension.SPECIFICITY,
    Dimension.HELPFULNESS,
    Dimension.VALIDITY,
)


class SelectionMode(str, Enum):
    HIGHEST = "highest"
    LOWEST = "lowest"


class SelectionError(FeedEvalError):
    """Selection aborted for a trait; carries whatever scores were collected."""

    def __init__(self, message: str, trait: TraitId, partial: dict):
        super().__init__(message)
        self.trait = trait
        self.partial = partial


def normalize(scores: Sequence[float]) -> list[float]:
    """Numerically stable softmax onto the probability simplex.

    Subtracting the maximum makes the result exactly invariant to adding a
    constant to every input; ``math.fsum`` makes the divisor independent of
    input order, so permuting the inputs permutes the outputs bit-exactly.
    """
    if not scores:
        raise DomainError("cannot normalize an empty score list")
    for value in scores:
        if math.isnan(value) or math.isinf(value):
            raise DomainError(f"scores must be finite, got {value}")
    peak = max(scores)
    exps = [math.exp(v - peak) for v in scores]
    total = math.fsum(exps)
    return [e / total for e in exps]


@dataclass(frozen=True)
class CandidateScores:
    """Full audit of one trait's selection: raw, normalized, and combined."""

    dimensions: tuple[Dimension, ...]
    raw: Mapping[Dimension, tuple[float, ...]]
    normalized: Mapping[Dimension, tuple[float, ...]]
    combined: tuple[float, ...]


@dataclass(frozen=True)
class SelectedFeedback:
    trait: TraitId
    index: int
    feedback: FeedbackCandidate
    mode: SelectionMode
    scores: CandidateScores


def _arg_extremum(values: Sequence[float], mode: SelectionMode) -> int:
    best = 0
    for i in range(1, len(values)):
        if mode is SelectionMode.HIGHEST:
            if values[i] > values[best]:
                best = i
        else:
            if values[i] < values[best]:
                best = i
    return best  # exact ties keep the lowest index


def _build_request(
    dimension: Dimension,
    essay: Essay,
    candidate: FeedbackCandidate,
    rubric: Rubric,
) -> ScoreRequest:
    if dimension is Dimension.VALIDITY:
        level = essay.human_scores.get(candidate.trait)
        if level is None:
            raise DomainError(
                f"essay {essay.essay_id!r} has no human score for "
                f"{candidate.trait.value!r}; validity needs the assigned level"
            )
        return ScoreRequest(
            dimension=dimension,
            feedback_text=candidate.text,
            rubric_description=rubric.description(level),
            rubric_levels=rubric.levels,
            evaluated_level=level,
        )
    return ScoreRequest(
        dimension=dimension,
        feedback_text=candidate.text,
        essay_text=essay.text,
    )


def select(
    essay: Essay,
    candidates: Sequence[FeedbackCandidate],
    rubric: Rubric,
    scorer: DimensionScorer,
    mode: SelectionMode = SelectionMode.HIGHEST,
    dimensions: Sequence[Dimension] = ALL_DIMENSIONS,
    max_workers: int | None = None,
) -> SelectedFeedback:
    """Score, normalize, and pick one candidate for a single trait.

    ``dimensions`` restricts scoring to a subset for ablation runs; the
    combined score then averages over the included dimensions only. Scoring
    may fan out over ``max_workers`` threads; results are keyed by
    (dimension, candidate), so completion order is irrelevant.
    """
    if not candidates:
        raise DomainError("candidate list is empty")
    if not dimensions:
        raise DomainError("at least one dimension is required")
    trait = candidates[0].trait
    if any(c.trait is not trait for c in candidates):
        raise DomainError("candidates mix traits")
    if trait is TraitId.OVERALL:
        raise DomainError("the Overall trait has no rubric and is never selected on")

    requests = {
        (dim, i): _build_request(dim, essay, candidate, rubric)
        for dim in dimensions
        for i, candidate in enumerate(candidates)
    }
    raw: dict[Dimension, list[float]] = {dim: [0.0] * len(candidates) for dim in dimensions}
    collected: dict = {}
    try:
        if max_workers and max_workers > 1:
            with ThreadPoolExecutor(max_workers=max_workers) as pool:
                futures = {
                    key: pool.submit(scorer.score, request)
                    for key, request in requests.items()
                }
                for (dim, i), future in futures.items():
                    value = future.result().value
                    raw[dim][i] = value
                    collected[(dim.value, i)] = value
        else:
            for (dim, i), request in requests.items():
                value = scorer.score(request).value
                raw[dim][i] = value
                collected[(dim.value, i)] = value
    except FeedEvalError as exc:
        raise SelectionError(
            f"scoring failed for trait {trait.value!r}: {exc}",
            trait=trait,
            partial=collected,
        ) from exc

    normalized = {dim: normalize(raw[dim]) for dim in dimensions}
    weight = 1.0 / len(dimensions)
    combined = [
        math.fsum(normalized[dim][i] * weight for dim in dimensions)
        for i in range(len(candidates))
    ]
    index = _arg_extremum(combined, mode)
    scores = CandidateScores(
        dimensions=tuple(dimensions),
        raw={dim: tuple(raw[dim]) for dim in dimensions},
        normalized={dim: tuple(normalized[dim]) for dim in dimensions},
        combined=tuple(combined),
    )
    return SelectedFeedback(
        trait=trait, index=index, feedback=candidates[index], mode=mode, scores=scores
    )


def select_all(
    essay: Essay,
    candidate_map: Mapping[TraitId, Sequence[FeedbackCandidate]],
    rubrics: Mapping[TraitId, Rubric],
    scorer: DimensionScorer,
    mode: SelectionMode = SelectionMode.HIGHEST,
    dimensions: Sequence[Dimension] = ALL_DIMENSIONS,
    max_workers: int | None = None,
) -> dict[TraitId, SelectedFeedback]:
    """Run selection independently for every non-Overall trait of the essay's prompt."""
    required = [t for t in traits_for_prompt(essay.prompt_id) if t is not TraitId.OVERALL]
    gaps = [t.value for t in required if not candidate_map.get(t)]
    if gaps:
        raise DomainError(f"no candidates for trait(s): {', '.join(gaps)}")
    missing_rubrics = [t.value for t in required if t not in rubrics]
    if missing_rubrics:
        raise DomainError(f"no rubric for trait(s): {', '.join(missing_rubrics)}")
    return {
        trait: select(
            essay,
            candidate_map[trait],
            rubrics[trait],
            scorer,
            mode=mode,
            dimensions=dimensions,
            max_workers=max_workers,
        )
        for trait in required
    }


def audit_record(essay_id: str, selected: SelectedFeedback) -> dict:
    """JSONL audit line for one (essay, trait) selection."""
    return {
        "essay_id": essay_id,
        "trait": selected.trait.value,
        "mode": selected.mode.value,
        "dimensions": [d.value for d in selected.scores.dimensions],
        "raw": {d.value: list(v) for d, v in selected.scores.raw.items()},
        "normalized": {d.value: list(v) for d, v in selected.scores.normalized.items()},
        "combined": list(selected.scores.combined),
        "chosen_index": selected.index,
        "sample_index": selected.feedback.sample_index,
    }
