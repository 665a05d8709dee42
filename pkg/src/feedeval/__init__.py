"""FeedEval: score LLM-generated essay feedback on specificity, helpfulness,
and validity; select high- and low-quality candidates; and build the
evaluator-training datasets, with offline backends for every moving part."""

from .core import (
    Essay,
    FeedbackCandidate,
    PromptSetting,
    Rubric,
    TraitId,
    score_range,
    traits_for_prompt,
)
from .scorers import Dimension, RawScore, ScoreRequest
from .selection import SelectionMode, select, select_all
from .specificity import (
    AlignmentConfig,
    Extractor,
    align_references,
    build_speceval_pairs,
    segment_sentences,
    specificity_score,
)

__version__ = "0.1.0"

__all__ = [
    "Essay",
    "FeedbackCandidate",
    "PromptSetting",
    "Rubric",
    "TraitId",
    "score_range",
    "traits_for_prompt",
    "Dimension",
    "RawScore",
    "ScoreRequest",
    "SelectionMode",
    "select",
    "select_all",
    "AlignmentConfig",
    "Extractor",
    "align_references",
    "build_speceval_pairs",
    "segment_sentences",
    "specificity_score",
    "__version__",
]
