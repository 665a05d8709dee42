"""Pluggable dimension scorers.

Specificity and helpfulness are scalar reward scores over (essay, feedback);
validity is the probability that feedback is entailed by the rubric
description at the essay's assigned level. Three interchangeable backends
serve every downstream module: a remote model endpoint, a deterministic
mock, and an offline heuristic. The mock and heuristic are stand-ins that
keep the pipeline testable without trained evaluators; they make no claim to
their judgment quality.
"""

from __future__ import annotations

import hashlib
import json
import math
import random
import re
import time
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Mapping, Protocol

import httpx

from . import specificity
from .errors import DomainError, ProtocolError, TransportError

__all__ = [
    "Dimension",
    "BackendKind",
    "ScoreRequest",
    "RawScore",
    "DimensionScorer",
    "MockScorer",
    "HeuristicScorer",
    "EndpointScorer",
    "EndpointConfig",
    "EndpointClient",
    "score",
    "validity_overlap_softmax",
]


class Dimension(str, Enum):
    SPECIFICITY = "specificity"
    HELPFULNESS = "helpfulness"
    VALIDITY = "validity"


class BackendKind(str, Enum):
    ENDPOINT = "endpoint"
    MOCK = "mock"
    HEURISTIC = "heuristic"


@dataclass(frozen=True)
class ScoreRequest:
    """One scoring call.

    Specificity and helpfulness compare feedback against the essay, so they
    carry ``essay_text`` and no rubric. Validity compares feedback against a
    rubric score description, so it carries ``rubric_description`` and no
    essay. ``rubric_levels``/``evaluated_level`` optionally expose the full
    rubric for the offline validity heuristic, which normalizes across
    levels.
    """

    dimension: Dimension
    feedback_text: str
    essay_text: str | None = None
    rubric_description: str | None = None
    rubric_levels: Mapping[int, str] | None = None
    evaluated_level: int | None = None

    def __post_init__(self) -> None:
        if not self.feedback_text.strip():
            raise DomainError("feedback_text must be non-empty")
        if self.dimension is Dimension.VALIDITY:
            if self.rubric_description is None:
                raise DomainError("validity requests require rubric_description")
            if self.essay_text is not None:
                raise DomainError("validity requests must not carry essay_text")
        else:
            if self.essay_text is None:
                raise DomainError(
                    f"{self.dimension.value} requests require essay_text"
                )
            if self.rubric_description is not None:
                raise DomainError(
                    f"{self.dimension.value} requests must not carry a rubric"
                )


@dataclass(frozen=True)
class RawScore:
    """A backend's verdict: unbounded real for reward scorers, [0,1] for validity."""

    value: float
    backend: BackendKind
    dimension: Dimension

    def __post_init__(self) -> None:
        if math.isnan(self.value) or math.isinf(self.value):
            raise DomainError(f"score must be finite, got {self.value}")
        if self.dimension is Dimension.VALIDITY and not 0.0 <= self.value <= 1.0:
            raise DomainError(f"validity score must lie in [0, 1], got {self.value}")


class DimensionScorer(Protocol):
    kind: BackendKind

    def score(self, request: ScoreRequest) -> RawScore: ...


def score(request: ScoreRequest, backend: DimensionScorer) -> RawScore:
    """Score a request with the given backend."""
    return backend.score(request)


class MockScorer:
    """Deterministic scorer keyed by a hash of the feedback text.

    The same request always yields the same value in [0, 1). A ``salt``
    decorrelates multiple mock instances in one test.
    """

    kind = BackendKind.MOCK

    def __init__(self, salt: str = ""):
        self.salt = salt

    def score(self, request: ScoreRequest) -> RawScore:
        key = "\x1f".join((self.salt, request.dimension.value, request.feedback_text))
        digest = hashlib.sha256(key.encode("utf-8")).digest()
        value = int.from_bytes(digest[:7], "big") / 2**56
        return RawScore(value=value, backend=self.kind, dimension=request.dimension)


_ACTIONABLE_VERBS = frozenset(
    """add avoid break check clarify combine connect consider correct develop
    edit eliminate ensure expand fix focus improve include introduce proofread
    provide remove reorganize rephrase replace restructure revise reword
    rewrite shorten simplify strengthen support tighten try use vary""".split()
)
_MODAL_RE = re.compile(r"\b(?:should|could)\s+[a-z]+", re.IGNORECASE)


def _is_actionable(sentence: str) -> bool:
    tokens = re.findall(r"[A-Za-z']+", sentence)
    if tokens and tokens[0].lower() in _ACTIONABLE_VERBS:
        return True
    return bool(_MODAL_RE.search(sentence))


def validity_overlap_softmax(
    rubric_levels: Mapping[int, str],
    feedback_text: str,
    evaluated_level: int,
) -> float:
    """Softmax over per-level content-word overlap, read at the target level.

    The overlap statistic for a level is the number of distinct content
    words shared between the feedback and that level's description. The
    output lies in (0, 1) and the values across levels sum to 1.
    """
    if evaluated_level not in rubric_levels:
        raise DomainError(f"evaluated level {evaluated_level} has no description")
    feedback_words = set(specificity.content_tokens(feedback_text))
    overlaps = {
        level: float(len(feedback_words & set(specificity.content_tokens(desc))))
        for level, desc in rubric_levels.items()
    }
    peak = max(overlaps.values())
    total = math.fsum(math.exp(v - peak) for v in overlaps.values())
    return math.exp(overlaps[evaluated_level] - peak) / total


class HeuristicScorer:
    """Offline, model-free stand-in for the trained evaluators.

    Specificity reuses the deterministic reference-alignment F1. Helpfulness
    is the fraction of feedback sentences that carry an actionable marker
    (imperative-initial verb or "should"/"could" + verb). Validity is the
    content-overlap softmax across rubric levels.
    """

    kind = BackendKind.HEURISTIC

    def __init__(self, config: specificity.AlignmentConfig | None = None):
        self.config = config or specificity.AlignmentConfig()

    def score(self, request: ScoreRequest) -> RawScore:
        if request.dimension is Dimension.SPECIFICITY:
            value = self._specificity(request)
        elif request.dimension is Dimension.HELPFULNESS:
            value = self._helpfulness(request)
        else:
            value = self._validity(request)
        return RawScore(value=value, backend=self.kind, dimension=request.dimension)

    def _specificity(self, request: ScoreRequest) -> float:
        assert request.essay_text is not None
        reference_map = specificity.align_references(
            request.essay_text, request.feedback_text, config=self.config
        )
        n_feedback = len(specificity.segment_sentences(request.feedback_text))
        n_essay = len(specificity.segment_sentences(request.essay_text))
        if n_feedback == 0 or n_essay == 0:
            return 0.0
        return specificity.specificity_score(reference_map, n_feedback, n_essay).f1

    def _helpfulness(self, request: ScoreRequest) -> float:
        sentences = specificity.segment_sentences(request.feedback_text)
        if not sentences:
            return 0.0
        actionable = sum(1 for s in sentences if _is_actionable(s.text))
        return actionable / len(sentences)

    def _validity(self, request: ScoreRequest) -> float:
        if request.rubric_levels is None or request.evaluated_level is None:
            raise DomainError(
                "heuristic validity needs rubric_levels and evaluated_level"
            )
        return validity_overlap_softmax(
            request.rubric_levels, request.feedback_text, request.evaluated_level
        )


@dataclass(frozen=True)
class EndpointConfig:
    """Where and how to reach a chat-completion-style model service."""

    url: str
    model: str
    credential_env: str | None = None
    structured: bool = False
    score_field: str = "score"
    temperature: float = 0.0
    timeout: float = 30.0
    max_attempts: int = 3
    base_delay: float = 0.5


_DECIMAL_RE = re.compile(r"[-+]?\d+(?:\.\d+)?(?:[eE][-+]?\d+)?")


class EndpointClient:
    """HTTP transport with idempotent retries.

    Requests are serialized once and resent byte-identically. Timeouts,
    connection failures, and HTTP >= 500 retry with jittered exponential
    backoff up to ``max_attempts``; HTTP 4xx is permanent.
    """

    def __init__(
        self,
        config: EndpointConfig,
        transport: httpx.BaseTransport | None = None,
        sleep: Callable[[float], None] = time.sleep,
        rng: random.Random | None = None,
    ):
        self.config = config
        self._client = httpx.Client(transport=transport, timeout=config.timeout)
        self._sleep = sleep
        self._rng = rng or random.Random()
        self.last_attempts = 0

    def close(self) -> None:
        self._client.close()

    def _headers(self) -> dict[str, str]:
        headers = {"Content-Type": "application/json"}
        if self.config.credential_env:
            import os

            credential = os.environ.get(self.config.credential_env)
            if credential:
                headers["Authorization"] = f"Bearer {credential}"
        return headers

    def invoke(self, payload: Mapping) -> dict:
        """POST the payload and return the parsed JSON response document."""
        body = json.dumps(payload, ensure_ascii=False).encode("utf-8")
        headers = self._headers()
        last_error: Exception | None = None
        for attempt in range(1, self.config.max_attempts + 1):
            self.last_attempts = attempt
            try:
                response = self._client.post(
                    self.config.url, content=body, headers=headers
                )
            except httpx.TimeoutException as exc:
                last_error = exc
            except httpx.TransportError as exc:
                last_error = exc
            else:
                if response.status_code >= 500:
                    last_error = TransportError(
                        f"HTTP {response.status_code}", attempts=attempt
                    )
                elif response.status_code >= 400:
                    raise ProtocolError(
                        f"HTTP {response.status_code} from {self.config.url}"
                    )
                else:
                    try:
                        return response.json()
                    except json.JSONDecodeError as exc:
                        raise ProtocolError(f"response is not JSON: {exc}") from exc
            if attempt < self.config.max_attempts:
                delay = self.config.base_delay * 2 ** (attempt - 1)
                self._sleep(delay * self._rng.uniform(0.75, 1.25))
        raise TransportError(
            f"{self.config.url} failed after {self.config.max_attempts} attempts: "
            f"{last_error}",
            attempts=self.config.max_attempts,
        )

    def complete(
        self,
        messages: list[dict],
        temperature: float | None = None,
        max_tokens: int | None = None,
    ) -> str:
        """Issue one chat completion and return the first message content."""
        payload: dict = {
            "model": self.config.model,
            "messages": messages,
            "temperature": (
                self.config.temperature if temperature is None else temperature
            ),
        }
        if max_tokens is not None:
            payload["max_tokens"] = max_tokens
        document = self.invoke(payload)
        return _first_message_content(document)

    def complete_text(self, prompt: str, **kwargs) -> str:
        return self.complete([{"role": "user", "content": prompt}], **kwargs)


def _first_message_content(document: Mapping) -> str:
    try:
        content = document["choices"][0]["message"]["content"]
    except (KeyError, IndexError, TypeError):
        raise ProtocolError(
            "response missing choices[0].message.content"
        ) from None
    if not isinstance(content, str):
        raise ProtocolError("message content is not a string")
    return content


def _lookup_field(document: Mapping, dotted_path: str):
    node = document
    for part in dotted_path.split("."):
        if not isinstance(node, Mapping) or part not in node:
            raise ProtocolError(f"response missing field {dotted_path!r}")
        node = node[part]
    return node


def _parse_decimal(text: str) -> float:
    stripped = text.strip()
    try:
        return float(stripped)
    except ValueError:
        pass
    match = _DECIMAL_RE.search(stripped)
    if match is None:
        raise ProtocolError(f"no decimal score in response content: {stripped[:80]!r}")
    return float(match.group(0))


_SCORE_PROMPTS = {
    Dimension.SPECIFICITY: (
        "Rate how specifically the feedback references the essay. Respond "
        "with a single decimal score; higher means more specific.\n\n"
        "[Essay]\n{essay}\n(end of [Essay])\n\n"
        "[Feedback]\n{feedback}\n(end of [Feedback])"
    ),
    Dimension.HELPFULNESS: (
        "Rate how actionable the feedback's revision guidance is. Respond "
        "with a single decimal score; higher means more helpful.\n\n"
        "[Essay]\n{essay}\n(end of [Essay])\n\n"
        "[Feedback]\n{feedback}\n(end of [Feedback])"
    ),
    Dimension.VALIDITY: (
        "Given the rubric score description as a premise and the feedback as "
        "a hypothesis, respond with the probability (a decimal in [0, 1]) "
        "that the feedback is entailed by the description.\n\n"
        "[Rubric description]\n{rubric}\n(end of [Rubric description])\n\n"
        "[Feedback]\n{feedback}\n(end of [Feedback])"
    ),
}


class EndpointScorer:
    """Dimension scorer backed by a remote model service."""

    kind = BackendKind.ENDPOINT

    def __init__(self, client: EndpointClient):
        self.client = client

    def score(self, request: ScoreRequest) -> RawScore:
        template = _SCORE_PROMPTS[request.dimension]
        prompt = template.format(
            essay=request.essay_text or "",
            feedback=request.feedback_text,
            rubric=request.rubric_description or "",
        )
        if self.client.config.structured:
            document = self.client.invoke(
                {
                    "model": self.client.config.model,
                    "messages": [{"role": "user", "content": prompt}],
                    "temperature": self.client.config.temperature,
                }
            )
            value = _lookup_field(document, self.client.config.score_field)
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                raise ProtocolError(
                    f"field {self.client.config.score_field!r} is not numeric: "
                    f"{value!r}"
                )
            parsed = float(value)
        else:
            parsed = _parse_decimal(self.client.complete_text(prompt))
        if request.dimension is Dimension.VALIDITY and not 0.0 <= parsed <= 1.0:
            raise ProtocolError(f"endpoint validity score {parsed} outside [0, 1]")
        return RawScore(value=parsed, backend=self.kind, dimension=request.dimension)
