"""Seeded cross-validation harness with per-(prompt, trait) QWK reporting."""

from __future__ import annotations

import logging
import random
from dataclasses import dataclass, field
from typing import Sequence

from ..core import Essay, score_range, traits_for_prompt
from ..errors import DomainError, UndefinedAgreementError
from ..metrics import format_qwk_report, qwk
from .backends import ScoringModel

logger = logging.getLogger(__name__)

__all__ = ["FoldReport", "assign_folds", "run_folds"]


def assign_folds(essays: Sequence[Essay], k: int, seed: int) -> list[int]:
    """Stratified-by-prompt fold assignment, deterministic in the seed.

    Essays of each prompt are shuffled with the shared seeded generator and
    dealt round-robin, so every fold sees every prompt (up to remainders).
    """
    if k < 2:
        raise DomainError(f"fold count must be >= 2, got {k}")
    rng = random.Random(seed)
    assignment = [0] * len(essays)
    by_prompt: dict[int, list[int]] = {}
    for index, essay in enumerate(essays):
        by_prompt.setdefault(essay.prompt_id, []).append(index)
    for prompt_id in sorted(by_prompt):
        indices = by_prompt[prompt_id]
        rng.shuffle(indices)
        for position, index in enumerate(indices):
            assignment[index] = position % k
    return assignment


def _clamp_prediction(value: float, lo: int, hi: int) -> int:
    return max(lo, min(hi, round(value)))


@dataclass
class FoldReport:
    k: int
    seed: int
    assignment: list[int]
    # (prompt_id, trait value) -> one kappa per fold that could score it
    scores: dict[tuple[int, str], list[float]] = field(default_factory=dict)
    skipped: list[str] = field(default_factory=list)

    def table(self) -> str:
        return format_qwk_report(self.scores)


def run_folds(
    essays: Sequence[Essay],
    k: int,
    seed: int,
    scoring_model: ScoringModel,
) -> FoldReport:
    """Evaluate a scoring model fold by fold.

    Each fold acts as the held-out set; QWK compares the model's (rounded,
    range-clamped) predictions against human scores per (prompt, trait).
    Folds with fewer than two items for a pair, or with degenerate rating
    series, are skipped with a warning rather than failing the run.
    """
    assignment = assign_folds(essays, k, seed)
    report = FoldReport(k=k, seed=seed, assignment=assignment)
    for fold in range(k):
        members = [e for e, f in zip(essays, assignment) if f == fold]
        predictions = {essay.essay_id: scoring_model.predict(essay) for essay in members}
        prompts = sorted({essay.prompt_id for essay in members})
        for prompt_id in prompts:
            group = [e for e in members if e.prompt_id == prompt_id]
            for trait in traits_for_prompt(prompt_id):
                lo, hi = score_range(prompt_id, trait)
                human: list[int] = []
                machine: list[int] = []
                for essay in group:
                    gold = essay.human_scores.get(trait)
                    predicted = predictions[essay.essay_id].get(trait)
                    if gold is None or predicted is None:
                        continue
                    human.append(gold)
                    machine.append(_clamp_prediction(predicted, lo, hi))
                key = (prompt_id, trait.value)
                if len(human) < 2:
                    message = f"fold {fold}: <2 items for prompt {prompt_id} {trait.value}"
                    logger.warning(message)
                    report.skipped.append(message)
                    continue
                try:
                    value = qwk(human, machine, lo, hi)
                except UndefinedAgreementError as exc:
                    message = (
                        f"fold {fold}: kappa undefined for prompt {prompt_id} "
                        f"{trait.value}: {exc}"
                    )
                    logger.warning(message)
                    report.skipped.append(message)
                    continue
                report.scores.setdefault(key, []).append(value)
    return report
