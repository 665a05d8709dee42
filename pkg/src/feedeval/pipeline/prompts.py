"""Feedback-generation prompt rendering.

Three settings vary how human-assigned scores and rubric score descriptions
enter the request: both together, scores alone, or the full rubric
guidelines without scores. Rendering is byte-stable; the test suite pins
each setting against a golden file.
"""

from __future__ import annotations

from typing import Mapping

from ..core import Essay, PromptSetting, Rubric, TraitId, traits_for_prompt
from ..errors import RenderError

__all__ = ["render_prompt", "ANSWER_FORMAT_LINE"]

_PREAMBLE = (
    "You are a member of the English essay writing test evaluation committee. "
    "Please, evaluate the given essay using following information."
)

_NOTE_BLOCK = (
    "[Note]\n"
    "I have made an effort to remove personally identifying information from "
    "the essays using the Named Entity Recognizer (NER). The relevant entities "
    "are identified in the text and then replaced with a string such as "
    "'@PERSON', '@ORGANIZATION', '@LOCATION', '@DATE', '@TIME', '@MONEY', "
    "'@PERCENT', '@CAPS' (any capitalized word) and '@NUM' (any digits). "
    "Please do not penalize the essay because of the anonymizations.\n"
    "(end of [Note])"
)

ANSWER_FORMAT_LINE = (
    '{"trait 1": "evaluation for trait 1", "trait 2": "evaluation for trait 2", ...}'
)

_QUESTION = {
    PromptSetting.SCORE_RUBRIC: (
        "Q. Identify specific excerpts from the [Essay] that illustrate the "
        "strengths or weaknesses highlighted in the [Rubric descriptions] for "
        "each trait. Quote or summarize the relevant parts of the essay.\n"
        "Based on this analysis, rationalize the [Rubric descriptions] for each "
        "trait. If the [Rubric descriptions] for a given trait indicates that "
        "the writing is strong, provide only positive feedback. If it "
        "identifies weaknesses, provide a detailed analysis of the issue and "
        "suggest specific ways to improve it. Keep your response for each "
        "trait within three sentences, and do not include any specific scores "
        "in your analysis. Provide your answer in the following format:"
    ),
    PromptSetting.SCORE_ONLY: (
        "Q. Identify specific excerpts from the [Essay] that illustrate the "
        "strengths or weaknesses for each trait. Quote or summarize the "
        "relevant parts of the essay. Based on your analysis, rationalize the "
        "score for each trait. If the writing is strong enough, provide only "
        "positive feedback. If there are some weaknesses, provide a detailed "
        "analysis of the issue and suggest specific ways to improve it. Keep "
        "your response for each trait within three sentences, and do not "
        "include any specific scores in your analysis. Provide your answer in "
        "the following format:"
    ),
    PromptSetting.RUBRIC_ONLY: (
        "Q. Identify specific excerpts from the [Essay] that illustrate the "
        "strengths or weaknesses highlighted in the [Rubric guidelines] for "
        "each trait. Quote or summarize the relevant parts of the essay.\n"
        "Based on your analysis, rationalize your analysis for each trait. If "
        "the writing is strong enough, provide only positive feedback. If "
        "there are some weaknesses, provide a detailed analysis of the issue "
        "and suggest specific ways to improve it. Keep your response for each "
        "trait within three sentences, and do not include any specific scores "
        "in your analysis. Provide your answer in the following format:"
    ),
}


def _block(name: str, body: str) -> str:
    return f"[{name}]\n{body}\n(end of [{name}])"


def _feedback_traits(essay: Essay) -> list[TraitId]:
    return [t for t in traits_for_prompt(essay.prompt_id) if t is not TraitId.OVERALL]


def _scores_block(essay: Essay, traits: list[TraitId]) -> str:
    lines = []
    for trait in traits:
        if trait not in essay.human_scores:
            raise RenderError(
                f"essay {essay.essay_id!r} has no human score for {trait.value!r}"
            )
        lines.append(f"{trait.display}: {essay.human_scores[trait]}")
    return _block("Scores", "\n".join(lines))


def _require_rubric(
    rubrics: Mapping[TraitId, Rubric], trait: TraitId, essay: Essay
) -> Rubric:
    rubric = rubrics.get(trait)
    if rubric is None:
        raise RenderError(
            f"no rubric for trait {trait.value!r} on prompt {essay.prompt_id}"
        )
    return rubric


def _rubric_descriptions_block(
    essay: Essay, traits: list[TraitId], rubrics: Mapping[TraitId, Rubric]
) -> str:
    parts = []
    for trait in traits:
        rubric = _require_rubric(rubrics, trait, essay)
        level = essay.human_scores.get(trait)
        if level is None:
            raise RenderError(
                f"essay {essay.essay_id!r} has no human score for {trait.value!r}"
            )
        parts.append(_block("Trait", trait.display))
        parts.append(
            f'The following is a rubric description in terms of the '
            f'"{trait.display}" trait.'
        )
        parts.append(f"Score {level}: {rubric.description(level)}")
    body = "\n".join(parts)
    return f"[Rubric descriptions]\n{body}\n(end of [Rubric descriptions])"


def _rubric_guidelines_block(
    essay: Essay, traits: list[TraitId], rubrics: Mapping[TraitId, Rubric]
) -> str:
    parts = []
    for trait in traits:
        rubric = _require_rubric(rubrics, trait, essay)
        parts.append(_block("Trait", trait.display))
        level_lines = "\n".join(
            f"Score {level}: {text}" for level, text in rubric.levels.items()
        )
        parts.append(_block("Trait Rubric", level_lines))
    body = "\n".join(parts)
    return f"[Rubric guidelines]\n{body}\n(end of [Rubric guidelines])"


def render_prompt(
    essay: Essay,
    setting: PromptSetting,
    rubrics: Mapping[TraitId, Rubric] | None = None,
    prompt_text: str | None = None,
) -> str:
    """Render the feedback-generation request for one essay.

    ``prompt_text`` is the writing assignment shown to the student; when not
    supplied, a stable placeholder naming the prompt id is used. The excerpt
    block appears only when the essay carries one. Rubric-bearing settings
    raise ``RenderError`` if a required trait has no rubric.
    """
    traits = _feedback_traits(essay)
    sections = [_PREAMBLE]
    sections.append(_block("Prompt", prompt_text or f"Writing prompt {essay.prompt_id}"))
    if essay.excerpt:
        sections.append(_block("Excerpt", essay.excerpt))

    if setting is PromptSetting.SCORE_RUBRIC:
        if rubrics is None:
            raise RenderError("score_rubric rendering requires rubrics")
        sections.append(_block("Essay", essay.text))
        sections.append(_scores_block(essay, traits))
        sections.append(_rubric_descriptions_block(essay, traits, rubrics))
        sections.append(
            "Refer to the provided [Prompt], [Excerpt], [Scores], and "
            "[Rubric descriptions] to evaluate the given essay.\n"
            "Your task is to analyze the reason why the essay got certain "
            "scores for each trait based on the analysis of the essay."
        )
    elif setting is PromptSetting.SCORE_ONLY:
        sections.append(_block("Essay", essay.text))
        sections.append(
            "Refer to the provided [Prompt] and [Excerpt] to evaluate the "
            "given essay. The following shows the scores of each trait "
            "provided by a human scorer."
        )
        sections.append(_scores_block(essay, traits))
        sections.append(
            "Your task is to analyze the reason why the essay got certain "
            "scores for each trait."
        )
    else:
        if rubrics is None:
            raise RenderError("rubric_only rendering requires rubrics")
        sections.append(_rubric_guidelines_block(essay, traits, rubrics))
        sections.append(
            "Refer to the provided [Prompt] and [Excerpt] to evaluate the "
            "given essay."
        )
        sections.append(_block("Essay", essay.text))

    sections.append(_NOTE_BLOCK)
    sections.append(_QUESTION[setting])
    sections.append(ANSWER_FORMAT_LINE)
    return "\n\n".join(sections)
