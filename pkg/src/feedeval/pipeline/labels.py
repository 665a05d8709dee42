"""Training-label emission: trait-keyed score/feedback objects as JSONL."""

from __future__ import annotations

from enum import Enum
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from ..core import PREDICTION_ORDER, Essay, TraitId, traits_for_prompt
from ..datasets import WriteReport, emit_jsonl
from ..errors import EmissionError
from ..selection import SelectedFeedback

__all__ = ["LabelMode", "build_training_labels", "emit_training_labels"]

OVERALL_FEEDBACK = "NAN"  # literal 3-character placeholder: Overall has no rubric


class LabelMode(str, Enum):
    SCORE_FEEDBACK = "score_feedback"  # {"score": ..., "feedback": ...} per trait
    SCORE_ONLY = "score_only"  # bare numbers, no feedback anywhere
    FEEDBACK_FIRST = "feedback_first"  # feedback precedes the score per trait


def _ordered_traits(essay: Essay) -> list[TraitId]:
    present = set(traits_for_prompt(essay.prompt_id))
    return [t for t in PREDICTION_ORDER if t in present]


def build_training_labels(
    essay: Essay,
    selections: Mapping[TraitId, SelectedFeedback] | Mapping[TraitId, str],
    mode: LabelMode = LabelMode.SCORE_FEEDBACK,
) -> dict:
    """Build one essay's label record.

    Trait keys follow the declared prediction order (Overall last). In the
    feedback-bearing modes each trait maps to a score/feedback object, with
    Overall's feedback fixed to the literal string "NAN"; score-only mode
    maps traits straight to numbers.
    """
    label: dict[str, object] = {}
    for trait in _ordered_traits(essay):
        if trait not in essay.human_scores:
            raise EmissionError(
                f"essay {essay.essay_id!r} has no human score for {trait.value!r}"
            )
        score = float(essay.human_scores[trait])
        if mode is LabelMode.SCORE_ONLY:
            label[trait.value] = score
            continue
        if trait is TraitId.OVERALL:
            feedback = OVERALL_FEEDBACK
        else:
            selected = selections.get(trait)
            if selected is None:
                raise EmissionError(
                    f"essay {essay.essay_id!r}: no selected feedback for "
                    f"{trait.value!r}"
                )
            feedback = (
                selected.feedback.text
                if isinstance(selected, SelectedFeedback)
                else str(selected)
            )
        if mode is LabelMode.FEEDBACK_FIRST:
            label[trait.value] = {"feedback": feedback, "score": score}
        else:
            label[trait.value] = {"score": score, "feedback": feedback}
    return {"essay_id": essay.essay_id, "prompt_id": essay.prompt_id, "label": label}


def emit_training_labels(
    essays: Sequence[Essay],
    selections: Mapping[str, Mapping[TraitId, SelectedFeedback]],
    path: str | Path,
    mode: LabelMode = LabelMode.SCORE_FEEDBACK,
) -> WriteReport:
    """Write one label record per essay; ``selections`` is keyed by essay id."""

    def records() -> Iterable[dict]:
        for essay in essays:
            yield build_training_labels(
                essay, selections.get(essay.essay_id, {}), mode
            )

    return emit_jsonl(records(), path, schema_tag=f"labels/{mode.value}")
