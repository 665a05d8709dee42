"""Model-role backends: feedback generation, essay scoring, and revision.

Each role has an endpoint-backed implementation plus deterministic offline
stand-ins so the whole pipeline runs and verifies without any model service.
Factories at the bottom build a backend from an ``EndpointDescriptor``.
"""

from __future__ import annotations

import hashlib
import json
import random
from typing import Mapping, Protocol

from ..core import Essay, PromptSetting, Rubric, TraitId, traits_for_prompt
from ..errors import DomainError
from ..scorers import (
    DimensionScorer,
    EndpointClient,
    EndpointConfig,
    EndpointScorer,
    HeuristicScorer,
    MockScorer,
)
from .config import EndpointDescriptor
from .prompts import render_prompt

__all__ = [
    "FeedbackGenerator",
    "EndpointFeedbackGenerator",
    "MockFeedbackGenerator",
    "ScoringModel",
    "EndpointScoringModel",
    "GoldEchoScoringModel",
    "ConstantScoringModel",
    "MarkerBonusScoringModel",
    "RevisionModel",
    "EndpointRevisionModel",
    "IdentityRevisionModel",
    "MarkerAppendingRevisionModel",
    "make_endpoint_client",
    "make_dimension_scorer",
    "make_feedback_generator",
    "make_scoring_model",
    "make_revision_model",
]


def _stable_words(key: str, count: int) -> list[str]:
    """Deterministic pseudo-words derived from a hash of the key."""
    digest = hashlib.sha256(key.encode("utf-8")).hexdigest()
    return [f"w{digest[i * 4 : i * 4 + 4]}" for i in range(count)]


class FeedbackGenerator(Protocol):
    """Draws one raw answer document (trait-keyed feedback) per call."""

    def generate(
        self,
        essay: Essay,
        setting: PromptSetting,
        sample_index: int,
        temperature: float,
        rubrics: Mapping[TraitId, Rubric] | None,
    ) -> str: ...


class EndpointFeedbackGenerator:
    def __init__(self, client: EndpointClient, prompt_text: str | None = None):
        self.client = client
        self.prompt_text = prompt_text

    def generate(self, essay, setting, sample_index, temperature, rubrics):
        prompt = render_prompt(essay, setting, rubrics, self.prompt_text)
        return self.client.complete(
            [{"role": "user", "content": prompt}], temperature=temperature
        )


class MockFeedbackGenerator:
    """Emits a parseable trait-keyed document, deterministic in its inputs.

    Feedback text varies with (seed, essay, setting, sample index) so that
    candidate sets contain distinct members and re-runs are byte-identical.
    """

    def __init__(self, seed: int = 0):
        self.seed = seed

    def generate(self, essay, setting, sample_index, temperature, rubrics):
        document = {}
        for trait in traits_for_prompt(essay.prompt_id):
            if trait is TraitId.OVERALL:
                continue
            key = (
                f"{self.seed}:{essay.essay_id}:{setting.value}:"
                f"{trait.value}:{sample_index}"
            )
            words = " ".join(_stable_words(key, 6))
            document[trait.value] = (
                f"Mock feedback on {trait.value} (sample {sample_index}): {words}."
            )
        return json.dumps(document, ensure_ascii=False)


class ScoringModel(Protocol):
    """Predicts per-trait scores for an essay."""

    def predict(self, essay: Essay) -> Mapping[TraitId, float]: ...


class EndpointScoringModel:
    """Scores essays through a chat endpoint using the trained-model input shape."""

    def __init__(self, client: EndpointClient):
        self.client = client

    def predict(self, essay: Essay) -> dict[TraitId, float]:
        from .generate import parse_score_document

        traits = traits_for_prompt(essay.prompt_id)
        trait_list = ", ".join(f"'{t.value}'" for t in traits if t is not TraitId.OVERALL)
        system = (
            "You are an essay evaluator. You will receive an essay and you "
            f"will need to evaluate the essay of prompt {essay.prompt_id}, "
            f"focusing on the following traits: [{trait_list}]. Score the "
            "essay in JSON format, using the trait names as keys, without "
            "any additional text."
        )
        content = self.client.complete(
            [
                {"role": "system", "content": system},
                {"role": "user", "content": f"Essay: {essay.text}"},
            ]
        )
        return parse_score_document(content, traits)


class GoldEchoScoringModel:
    """Returns the human scores verbatim; the oracle model for harness tests."""

    def predict(self, essay: Essay) -> dict[TraitId, float]:
        return {trait: float(v) for trait, v in essay.human_scores.items()}


class ConstantScoringModel:
    def __init__(self, value: float = 0.0):
        self.value = value

    def predict(self, essay: Essay) -> dict[TraitId, float]:
        return {trait: self.value for trait in traits_for_prompt(essay.prompt_id)}


class MarkerBonusScoringModel:
    """Wraps a scoring model, adding a bonus when the essay carries a marker.

    Pairs with ``MarkerAppendingRevisionModel`` to verify the revision
    harness end to end: a planted marker must shift every trait delta by
    exactly the bonus.
    """

    def __init__(self, base: ScoringModel, marker: str, bonus: float = 1.0):
        self.base = base
        self.marker = marker
        self.bonus = bonus

    def predict(self, essay: Essay) -> dict[TraitId, float]:
        scores = dict(self.base.predict(essay))
        if self.marker in essay.text:
            scores = {t: v + self.bonus for t, v in scores.items()}
        return scores


class RevisionModel(Protocol):
    """Rewrites an essay according to per-trait feedback."""

    def revise(
        self,
        essay: Essay,
        feedback: Mapping[TraitId, str],
        temperature: float,
        max_new_tokens: int,
    ) -> str: ...


_REVISION_PROMPT = """\
Revise the following essay according to the feedback. Respond with the \
revised essay only.

[Essay]
{essay}
(end of [Essay])

[Feedback]
{feedback}
(end of [Feedback])
"""


class EndpointRevisionModel:
    def __init__(self, client: EndpointClient):
        self.client = client

    def revise(self, essay, feedback, temperature, max_new_tokens):
        feedback_text = "\n".join(
            f"{trait.display}: {text}" for trait, text in feedback.items()
        )
        return self.client.complete(
            [
                {
                    "role": "user",
                    "content": _REVISION_PROMPT.format(
                        essay=essay.text, feedback=feedback_text
                    ),
                }
            ],
            temperature=temperature,
            max_tokens=max_new_tokens,
        )


class IdentityRevisionModel:
    """Returns the essay unchanged; deltas must be zero."""

    def revise(self, essay, feedback, temperature, max_new_tokens):
        return essay.text


class MarkerAppendingRevisionModel:
    def __init__(self, marker: str):
        self.marker = marker

    def revise(self, essay, feedback, temperature, max_new_tokens):
        return f"{essay.text}\n{self.marker}"


def make_endpoint_client(descriptor: EndpointDescriptor) -> EndpointClient:
    if descriptor.kind != "endpoint":
        raise DomainError(f"descriptor kind {descriptor.kind!r} is not an endpoint")
    return EndpointClient(
        EndpointConfig(
            url=descriptor.url or "",
            model=descriptor.model or "",
            credential_env=descriptor.credential_env,
            structured=descriptor.structured,
            score_field=descriptor.score_field,
            timeout=descriptor.timeout,
            max_attempts=descriptor.max_attempts,
            base_delay=descriptor.base_delay,
        )
    )


def make_dimension_scorer(
    descriptor: EndpointDescriptor, seed: int = 0
) -> DimensionScorer:
    if descriptor.kind == "endpoint":
        return EndpointScorer(make_endpoint_client(descriptor))
    if descriptor.kind == "heuristic":
        return HeuristicScorer()
    return MockScorer(salt=str(seed))


def make_feedback_generator(
    descriptor: EndpointDescriptor, seed: int = 0
) -> FeedbackGenerator:
    if descriptor.kind == "endpoint":
        return EndpointFeedbackGenerator(make_endpoint_client(descriptor))
    return MockFeedbackGenerator(seed=seed)


def make_scoring_model(descriptor: EndpointDescriptor) -> ScoringModel:
    if descriptor.kind == "endpoint":
        return EndpointScoringModel(make_endpoint_client(descriptor))
    return GoldEchoScoringModel()


def make_revision_model(descriptor: EndpointDescriptor) -> RevisionModel:
    if descriptor.kind == "endpoint":
        return EndpointRevisionModel(make_endpoint_client(descriptor))
    return IdentityRevisionModel()


def shuffled(items: list, seed: int) -> list:
    """Seeded Fisher-Yates shuffle that leaves the input untouched."""
    out = list(items)
    random.Random(seed).shuffle(out)
    return out
