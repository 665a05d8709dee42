"""Revision harness: rescore essays after feedback-guided rewriting."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Mapping, Sequence

from ..core import Essay, TraitId
from ..errors import FeedEvalError
from .backends import RevisionModel, ScoringModel

logger = logging.getLogger(__name__)

__all__ = ["RevisionDelta", "RevisionReport", "run_revision"]


@dataclass(frozen=True)
class RevisionDelta:
    essay_id: str
    condition: str
    deltas: Mapping[TraitId, float]


@dataclass
class RevisionReport:
    results: list[RevisionDelta] = field(default_factory=list)
    skipped: list[str] = field(default_factory=list)

    def mean_deltas(self, condition: str) -> dict[TraitId, float]:
        sums: dict[TraitId, float] = {}
        counts: dict[TraitId, int] = {}
        for entry in self.results:
            if entry.condition != condition:
                continue
            for trait, delta in entry.deltas.items():
                sums[trait] = sums.get(trait, 0.0) + delta
                counts[trait] = counts.get(trait, 0) + 1
        return {trait: sums[trait] / counts[trait] for trait in sums}


def run_revision(
    essays: Sequence[Essay],
    feedback_sets: Mapping[str, Mapping[str, Mapping[TraitId, str]]],
    revision_model: RevisionModel,
    scoring_model: ScoringModel,
    temperature: float = 0.7,
    max_new_tokens: int = 1000,
) -> RevisionReport:
    """Revise each essay under every condition and record per-trait deltas.

    ``feedback_sets`` maps condition name (e.g. "high", "low") to per-essay
    trait-keyed feedback. Generation is capped at ``max_new_tokens``. A
    revision-backend failure skips that essay in that condition only.
    """
    report = RevisionReport()
    for essay in essays:
        original_scores = scoring_model.predict(essay)
        for condition, per_essay in feedback_sets.items():
            feedback = per_essay.get(essay.essay_id)
            if not feedback:
                continue
            try:
                revised_text = revision_model.revise(
                    essay, feedback, temperature, max_new_tokens
                )
                revised = Essay(
                    essay_id=f"{essay.essay_id}/revised/{condition}",
                    prompt_id=essay.prompt_id,
                    text=revised_text,
                    excerpt=essay.excerpt,
                )
                revised_scores = scoring_model.predict(revised)
            except FeedEvalError as exc:
                message = f"{essay.essay_id} [{condition}]: {exc}"
                logger.warning("revision skipped: %s", message)
                report.skipped.append(message)
                continue
            deltas = {
                trait: revised_scores[trait] - original
                for trait, original in original_scores.items()
                if trait in revised_scores
            }
            report.results.append(
                RevisionDelta(
                    essay_id=essay.essay_id, condition=condition, deltas=deltas
                )
            )
    return report
