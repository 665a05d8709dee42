"""Domain types for essays, traits, rubrics, and score ranges.

The trait layout follows the six-prompt ASAP++ composition: prompts 1-2 are
scored on Content, Word Choice, Organization, Sentence Fluency, and
Conventions, prompts 3-6 on Content, Prompt Adherence, Narrativity, and
Language, and every prompt additionally carries an Overall score. All types
are immutable after construction and safe to share across threads.
"""

from __future__ import annotations

import re
import unicodedata
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Mapping

import yaml

from .errors import DomainError

__all__ = [
    "TraitId",
    "Essay",
    "Rubric",
    "RubricSet",
    "FeedbackCandidate",
    "PromptSetting",
    "PREDICTION_ORDER",
    "traits_for_prompt",
    "score_range",
    "load_rubric_file",
    "load_rubric_dir",
    "normalize_text",
]

ANON_TOKEN_RE = re.compile(r"@[A-Z]+\d*")


class TraitId(str, Enum):
    """The nine scored writing traits. Values double as JSON label keys."""

    OVERALL = "overall"
    CONTENT = "content"
    WORD_CHOICE = "word choice"
    ORGANIZATION = "organization"
    SENTENCE_FLUENCY = "sentence fluency"
    CONVENTIONS = "conventions"
    PROMPT_ADHERENCE = "prompt adherence"
    NARRATIVITY = "narrativity"
    LANGUAGE = "language"

    @property
    def display(self) -> str:
        """Human-readable name as printed in prompt blocks, e.g. 'Word Choice'."""
        return self.value.title()

    @classmethod
    def from_name(cls, name: str) -> "TraitId":
        """Resolve a trait from a label key, display name, or enum name."""
        key = name.strip().lower().replace("_", " ")
        for trait in cls:
            if key == trait.value:
                return trait
        raise DomainError(f"unknown trait name: {name!r}")


_ARG_TRAITS = (
    TraitId.OVERALL,
    TraitId.CONTENT,
    TraitId.WORD_CHOICE,
    TraitId.ORGANIZATION,
    TraitId.SENTENCE_FLUENCY,
    TraitId.CONVENTIONS,
)
_SRC_TRAITS = (
    TraitId.OVERALL,
    TraitId.CONTENT,
    TraitId.PROMPT_ADHERENCE,
    TraitId.NARRATIVITY,
    TraitId.LANGUAGE,
)

_PROMPT_TRAITS: dict[int, tuple[TraitId, ...]] = {
    1: _ARG_TRAITS,
    2: _ARG_TRAITS,
    3: _SRC_TRAITS,
    4: _SRC_TRAITS,
    5: _SRC_TRAITS,
    6: _SRC_TRAITS,
}

# (lo, hi) inclusive; Overall differs from the shared trait range only on prompt 1.
_OVERALL_RANGES: dict[int, tuple[int, int]] = {
    1: (2, 12),
    2: (1, 6),
    3: (0, 3),
    4: (0, 3),
    5: (0, 4),
    6: (0, 4),
}
_TRAIT_RANGES: dict[int, tuple[int, int]] = {
    1: (1, 6),
    2: (1, 6),
    3: (0, 3),
    4: (0, 3),
    5: (0, 4),
    6: (0, 4),
}

# Serialization order for training labels: traits are emitted in generation
# order, which runs opposite to the reporting order (Overall last).
PREDICTION_ORDER: tuple[TraitId, ...] = (
    TraitId.SENTENCE_FLUENCY,
    TraitId.WORD_CHOICE,
    TraitId.CONVENTIONS,
    TraitId.ORGANIZATION,
    TraitId.NARRATIVITY,
    TraitId.LANGUAGE,
    TraitId.PROMPT_ADHERENCE,
    TraitId.CONTENT,
    TraitId.OVERALL,
)


def traits_for_prompt(prompt_id: int) -> tuple[TraitId, ...]:
    """Return the trait set for a prompt, Overall included, in canonical order."""
    try:
        return _PROMPT_TRAITS[prompt_id]
    except KeyError:
        raise DomainError(f"prompt_id must be 1..6, got {prompt_id}") from None


def score_range(prompt_id: int, trait: TraitId) -> tuple[int, int]:
    """Return the inclusive (lo, hi) score interval for a (prompt, trait) pair."""
    if trait not in traits_for_prompt(prompt_id):
        raise DomainError(f"trait {trait.value!r} is not scored on prompt {prompt_id}")
    if trait is TraitId.OVERALL:
        return _OVERALL_RANGES[prompt_id]
    return _TRAIT_RANGES[prompt_id]


def normalize_text(text: str) -> str:
    """Unicode NFC plus CR/LF collapse to LF. No other mutation."""
    return unicodedata.normalize("NFC", text).replace("\r\n", "\n").replace("\r", "\n")


@dataclass(frozen=True)
class Essay:
    """A student essay with human trait scores.

    ``text`` is normalized (NFC, LF line endings) at construction so that
    downstream offsets stay stable. ``human_scores`` may cover any subset of
    the prompt's traits; every present score must lie in range.
    """

    essay_id: str
    prompt_id: int
    text: str
    excerpt: str | None = None
    human_scores: Mapping[TraitId, int] = field(default_factory=dict)

    def __post_init__(self) -> None:
        valid = traits_for_prompt(self.prompt_id)  # raises on bad prompt_id
        normalized = normalize_text(self.text)
        if not normalized.strip():
            raise DomainError(f"essay {self.essay_id!r}: text is empty")
        object.__setattr__(self, "text", normalized)
        if self.excerpt is not None:
            object.__setattr__(self, "excerpt", normalize_text(self.excerpt))
        scores = dict(self.human_scores)
        for trait, value in scores.items():
            if trait not in valid:
                raise DomainError(
                    f"essay {self.essay_id!r}: trait {trait.value!r} is not valid "
                    f"for prompt {self.prompt_id}"
                )
            if not isinstance(value, int) or isinstance(value, bool):
                raise DomainError(
                    f"essay {self.essay_id!r}: score for {trait.value!r} must be "
                    f"an integer, got {value!r}"
                )
            lo, hi = score_range(self.prompt_id, trait)
            if not lo <= value <= hi:
                raise DomainError(
                    f"essay {self.essay_id!r}: score {value} for {trait.value!r} "
                    f"outside [{lo}, {hi}]"
                )
        object.__setattr__(self, "human_scores", scores)

    def scored_traits(self) -> tuple[TraitId, ...]:
        """Traits with a human score, in the prompt's canonical order."""
        return tuple(t for t in traits_for_prompt(self.prompt_id) if t in self.human_scores)


@dataclass(frozen=True)
class Rubric:
    """Score-level descriptions for one (prompt, trait).

    Level keys must be contiguous integers; for the six known prompts they
    must exactly span the trait's score range. Overall carries no rubric.
    """

    prompt_id: int
    trait: TraitId
    levels: Mapping[int, str]

    def __post_init__(self) -> None:
        if self.trait is TraitId.OVERALL:
            raise DomainError("the Overall trait has no rubric")
        keys = sorted(self.levels)
        if not keys:
            raise DomainError(f"rubric for {self.trait.value!r} has no levels")
        if keys != list(range(keys[0], keys[-1] + 1)):
            raise DomainError(
                f"rubric for {self.trait.value!r} has non-contiguous levels: {keys}"
            )
        if 1 <= self.prompt_id <= 6:
            lo, hi = score_range(self.prompt_id, self.trait)
            if (keys[0], keys[-1]) != (lo, hi):
                raise DomainError(
                    f"rubric for prompt {self.prompt_id} {self.trait.value!r} spans "
                    f"[{keys[0]}, {keys[-1]}], expected [{lo}, {hi}]"
                )
        object.__setattr__(self, "levels", {k: self.levels[k] for k in keys})

    def description(self, level: int) -> str:
        try:
            return self.levels[level]
        except KeyError:
            raise DomainError(
                f"rubric for {self.trait.value!r} has no level {level}"
            ) from None


RubricSet = Mapping[TraitId, Rubric]


class PromptSetting(str, Enum):
    """How scores and rubric descriptions enter a feedback-generation prompt."""

    SCORE_RUBRIC = "score_rubric"
    SCORE_ONLY = "score_only"
    RUBRIC_ONLY = "rubric_only"


@dataclass(frozen=True)
class FeedbackCandidate:
    """One trait-specific feedback text with its generation metadata."""

    essay_id: str
    trait: TraitId
    text: str
    setting: PromptSetting = PromptSetting.SCORE_RUBRIC
    sample_index: int = 0
    temperature: float = 0.7

    def __post_init__(self) -> None:
        if not self.text.strip():
            raise DomainError(
                f"feedback candidate for essay {self.essay_id!r} "
                f"trait {self.trait.value!r} is empty"
            )
        if self.sample_index < 0:
            raise DomainError(f"sample_index must be >= 0, got {self.sample_index}")


def load_rubric_file(path: str | Path, prompt_id: int) -> dict[TraitId, Rubric]:
    """Load one prompt's rubric document.

    The file is YAML with top-level keys naming traits and nested integer
    keys naming score levels. Only structure is validated; the description
    text itself is free-form.
    """
    raw = yaml.safe_load(Path(path).read_text(encoding="utf-8"))
    if not isinstance(raw, dict):
        raise DomainError(f"rubric file {path} is not a mapping")
    rubrics: dict[TraitId, Rubric] = {}
    for trait_name, levels in raw.items():
        trait = TraitId.from_name(str(trait_name))
        if not isinstance(levels, dict):
            raise DomainError(f"rubric for {trait_name!r} in {path} is not a mapping")
        parsed: dict[int, str] = {}
        for key, text in levels.items():
            try:
                level = int(key)
            except (TypeError, ValueError):
                raise DomainError(
                    f"rubric level key {key!r} for {trait_name!r} in {path} "
                    f"is not an integer"
                ) from None
            parsed[level] = str(text)
        rubrics[trait] = Rubric(prompt_id=prompt_id, trait=trait, levels=parsed)
    return rubrics


def load_rubric_dir(directory: str | Path) -> dict[int, dict[TraitId, Rubric]]:
    """Load ``prompt<N>.yaml`` rubric files for every prompt present in a directory."""
    directory = Path(directory)
    out: dict[int, dict[TraitId, Rubric]] = {}
    for path in sorted(directory.glob("prompt*.yaml")):
        match = re.fullmatch(r"prompt(\d+)\.yaml", path.name)
        if not match:
            continue
        prompt_id = int(match.group(1))
        out[prompt_id] = load_rubric_file(path, prompt_id)
    return out


def default_rubric_dir() -> Path:
    """Directory of the rubric documents shipped with the package."""
    return Path(__file__).parent / "data" / "rubrics"
