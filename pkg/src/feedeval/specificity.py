"""Deterministic specificity measurement.

Specificity asks how concretely feedback engages with the essay it discusses.
We segment both texts into sentences, link feedback sentences to the essay
sentences they quote or heavily overlap, and score the link set two ways:
faithfulness (share of feedback sentences that reference the essay) and
coverage (share of essay sentences referenced). Specificity is their
harmonic mean. The same machinery builds the chosen/rejected pairs used to
train a specificity reward model from ranked feedback variants.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Sequence

from .core import Essay, FeedbackCandidate
from .datasets import PairSource, PreferencePair
from .errors import DomainError, ExtractionFormatError

__all__ = [
    "SentenceSpan",
    "ReferenceMap",
    "SpecificityBreakdown",
    "Extractor",
    "AlignmentConfig",
    "segment_sentences",
    "align_references",
    "specificity_score",
    "build_speceval_pairs",
    "speceval_record",
    "fuzzy_substring_similarity",
    "content_tokens",
]

# Words that end with a period without ending a sentence.
ABBREVIATIONS = frozenset(
    "mr mrs ms dr prof rev sr jr st mt etc vs fig no inc dept est approx".split()
)

# Small closed-class vocabulary ignored when comparing content overlap.
STOPWORDS = frozenset(
    """a an and are as at be been but by can could did do does for from had has
    have he her hers him his i if in into is it its may me might my of on or
    our she should so some such than that the their them then there these they
    this those to was we were what when which who will with would you your
    not no nor only very more most also""".split()
)

_CLOSERS = "\"'”’)]"
_OPENERS = "\"“‘"

_QUOTE_RE = re.compile(r'"([^"]+)"|“([^”]+)”|‘([^’]+)’')
_TOKEN_RE = re.compile(r"[\w@']+")
_WS_RE = re.compile(r"\s+")


@dataclass(frozen=True)
class SentenceSpan:
    """One sentence as a slice of its source text (character offsets)."""

    index: int
    start: int
    end: int
    text: str


class Extractor(str, Enum):
    DETERMINISTIC_FUZZY = "deterministic_fuzzy"
    BACKEND_EXTRACT = "backend_extract"


@dataclass(frozen=True)
class ReferenceMap:
    """Links from feedback sentence indices to essay sentence indices."""

    links: frozenset[tuple[int, int]]
    extractor: Extractor


@dataclass(frozen=True)
class SpecificityBreakdown:
    faithfulness: float
    coverage: float
    f1: float


@dataclass(frozen=True)
class AlignmentConfig:
    """Knobs for the deterministic linking rules.

    A quoted snippet links when its best fuzzy-substring match inside an
    essay sentence reaches ``similarity_threshold`` (normalized Levenshtein
    similarity); unquoted overlap links when the two sentences share a
    content-word n-gram of at least ``ngram_length`` words.
    """

    similarity_threshold: float = 0.85
    ngram_length: int = 5
    min_quote_chars: int = 3


def _next_content(text: str, pos: int) -> int | None:
    while pos < len(text):
        if not text[pos].isspace():
            return pos
        pos += 1
    return None


def _preceding_word(text: str, pos: int) -> str:
    end = pos
    start = pos
    while start > 0 and (text[start - 1].isalnum() or text[start - 1] == "@"):
        start -= 1
    return text[start:end]


def _is_boundary(text: str, punct_start: int, run_end: int, close_end: int) -> bool:
    if close_end >= len(text):
        return True
    if not text[close_end].isspace():
        return False
    nxt = _next_content(text, close_end)
    if nxt is None:
        return True
    if text[punct_start] == "." and run_end - punct_start == 1:
        word = _preceding_word(text, punct_start)
        if word and word.lower() in ABBREVIATIONS:
            return False
        if len(word) == 1 and word.isalpha():
            return False  # initials such as "J. Smith"
    starter = text[nxt]
    return starter.isupper() or starter == "@" or starter in _OPENERS


def segment_sentences(text: str) -> list[SentenceSpan]:
    """Split text into sentence spans covering all non-whitespace content.

    A boundary is terminal punctuation (``.``, ``!``, ``?``, plus trailing
    quotes or brackets) followed by whitespace and a sentence starter, or the
    end of the text. A single period after a known abbreviation or a lone
    initial does not split. Anonymization tokens (``@PERSON1`` and friends)
    are ordinary words: they start sentences but never end one by themselves.
    """
    spans: list[SentenceSpan] = []
    n = len(text)
    start = _next_content(text, 0)
    if start is None:
        return []
    i = start
    while i < n:
        if text[i] not in ".!?":
            i += 1
            continue
        run_end = i
        while run_end < n and text[run_end] in ".!?":
            run_end += 1
        close_end = run_end
        while close_end < n and text[close_end] in _CLOSERS:
            close_end += 1
        if _is_boundary(text, i, run_end, close_end):
            spans.append(
                SentenceSpan(len(spans), start, close_end, text[start:close_end])
            )
            nxt = _next_content(text, close_end)
            if nxt is None:
                return spans
            start = nxt
            i = nxt
        else:
            i = close_end
    end = n
    while end > start and text[end - 1].isspace():
        end -= 1
    spans.append(SentenceSpan(len(spans), start, end, text[start:end]))
    return spans


def _normalize_for_match(text: str) -> str:
    text = text.replace("’", "'").replace("‘", "'")
    text = text.replace("“", '"').replace("”", '"')
    return _WS_RE.sub(" ", text).strip().lower()


def fuzzy_substring_similarity(needle: str, haystack: str) -> float:
    """Best normalized Levenshtein similarity of needle against any
    contiguous substring of haystack, after lowercasing and whitespace
    collapse. 1.0 means the needle appears verbatim."""
    needle = _normalize_for_match(needle)
    haystack = _normalize_for_match(haystack)
    if not needle or not haystack:
        return 0.0
    # Edit-distance DP with free start/end in the haystack: the first row is
    # zero, and the answer is the minimum of the last row.
    previous = [0] * (len(haystack) + 1)
    for i, nc in enumerate(needle, start=1):
        current = [i] + [0] * len(haystack)
        for j, hc in enumerate(haystack, start=1):
            cost = 0 if nc == hc else 1
            current[j] = min(previous[j] + 1, current[j - 1] + 1, previous[j - 1] + cost)
        previous = current
    distance = min(previous)
    return max(0.0, 1.0 - distance / len(needle))


def content_tokens(text: str, stopwords: frozenset[str] = STOPWORDS) -> list[str]:
    return [t for t in _TOKEN_RE.findall(text.lower()) if t not in stopwords]


def _ngrams(tokens: Sequence[str], length: int) -> set[tuple[str, ...]]:
    if len(tokens) < length:
        return set()
    return {tuple(tokens[i : i + length]) for i in range(len(tokens) - length + 1)}


def extract_quotes(text: str, min_chars: int = 3) -> list[str]:
    quotes = []
    for match in _QUOTE_RE.finditer(text):
        quote = next(g for g in match.groups() if g is not None)
        if len(quote.strip()) >= min_chars:
            quotes.append(quote.strip())
    return quotes


_EXTRACTION_PROMPT = """\
You are given a student essay and feedback written about it. List every essay \
segment that the feedback quotes or refers to directly. Respond with a JSON \
array of strings, each an exact segment copied from the essay, and nothing else.

[Essay]
{essay}
(end of [Essay])

[Feedback]
{feedback}
(end of [Feedback])
"""


def _parse_segments(response: str) -> list[str]:
    start = response.find("[")
    end = response.rfind("]")
    if start == -1 or end == -1 or end <= start:
        raise ExtractionFormatError("response contains no JSON array")
    try:
        parsed = json.loads(response[start : end + 1])
    except json.JSONDecodeError as exc:
        raise ExtractionFormatError(f"segment array is not valid JSON: {exc}") from exc
    if not isinstance(parsed, list) or not all(isinstance(s, str) for s in parsed):
        raise ExtractionFormatError("segment array must contain only strings")
    return [s for s in parsed if s.strip()]


def align_references(
    essay: Essay | str,
    feedback: str,
    extractor: Extractor = Extractor.DETERMINISTIC_FUZZY,
    config: AlignmentConfig = AlignmentConfig(),
    complete: Callable[[str], str] | None = None,
) -> ReferenceMap:
    """Link feedback sentences to the essay sentences they reference.

    In deterministic mode, feedback sentence i links to essay sentence j when
    a quoted snippet of i fuzzily appears in j, or when the two share a long
    content-word n-gram. In backend mode, ``complete`` is called with an
    extraction request; the returned segments are resolved to sentences on
    both sides with the same similarity rule.
    """
    essay_text = essay.text if isinstance(essay, Essay) else essay
    essay_spans = segment_sentences(essay_text)
    feedback_spans = segment_sentences(feedback)
    links: set[tuple[int, int]] = set()

    if extractor is Extractor.DETERMINISTIC_FUZZY:
        essay_grams = [
            _ngrams(content_tokens(span.text), config.ngram_length)
            for span in essay_spans
        ]
        for f_span in feedback_spans:
            quotes = extract_quotes(f_span.text, config.min_quote_chars)
            f_grams = _ngrams(content_tokens(f_span.text), config.ngram_length)
            for e_span in essay_spans:
                linked = any(
                    fuzzy_substring_similarity(quote, e_span.text)
                    >= config.similarity_threshold
                    for quote in quotes
                )
                if not linked and f_grams and (f_grams & essay_grams[e_span.index]):
                    linked = True
                if linked:
                    links.add((f_span.index, e_span.index))
    else:
        if complete is None:
            raise DomainError("backend extraction requires a completion callable")
        response = complete(
            _EXTRACTION_PROMPT.format(essay=essay_text, feedback=feedback)
        )
        for segment in _parse_segments(response):
            essay_hits = [
                span.index
                for span in essay_spans
                if fuzzy_substring_similarity(segment, span.text)
                >= config.similarity_threshold
            ]
            feedback_hits = [
                span.index
                for span in feedback_spans
                if fuzzy_substring_similarity(segment, span.text)
                >= config.similarity_threshold
            ]
            links.update((f, e) for f in feedback_hits for e in essay_hits)

    return ReferenceMap(links=frozenset(links), extractor=extractor)


def specificity_score(
    reference_map: ReferenceMap,
    n_feedback: int,
    n_essay: int,
) -> SpecificityBreakdown:
    """Faithfulness, coverage, and their harmonic mean for a link set.

    A feedback sentence referencing several essay sentences counts once
    toward faithfulness (and symmetrically for coverage). An empty link set
    scores zero on all three: fully generic feedback earns nothing.
    """
    if n_feedback <= 0 or n_essay <= 0:
        raise DomainError(
            f"sentence counts must be positive, got {n_feedback} and {n_essay}"
        )
    for f_idx, e_idx in reference_map.links:
        if not (0 <= f_idx < n_feedback and 0 <= e_idx < n_essay):
            raise DomainError(
                f"link ({f_idx}, {e_idx}) outside ranges "
                f"{n_feedback} x {n_essay}"
            )
    faithfulness = len({f for f, _ in reference_map.links}) / n_feedback
    coverage = len({e for _, e in reference_map.links}) / n_essay
    if faithfulness + coverage > 0:
        f1 = 2 * faithfulness * coverage / (faithfulness + coverage)
    else:
        f1 = 0.0
    return SpecificityBreakdown(faithfulness=faithfulness, coverage=coverage, f1=f1)


def candidate_specificity(
    essay: Essay,
    feedback: str,
    extractor: Extractor = Extractor.DETERMINISTIC_FUZZY,
    config: AlignmentConfig = AlignmentConfig(),
    complete: Callable[[str], str] | None = None,
) -> SpecificityBreakdown:
    """Segment, align, and score one essay/feedback pair in a single call."""
    reference_map = align_references(essay, feedback, extractor, config, complete)
    return specificity_score(
        reference_map,
        n_feedback=len(segment_sentences(feedback)),
        n_essay=len(segment_sentences(essay.text)),
    )


def build_speceval_pairs(
    essay: Essay,
    variants: Sequence[FeedbackCandidate],
    extractor: Extractor = Extractor.DETERMINISTIC_FUZZY,
    config: AlignmentConfig = AlignmentConfig(),
    complete: Callable[[str], str] | None = None,
) -> list[PreferencePair]:
    """Rank feedback variants by specificity and emit chosen/rejected pairs.

    All variants must share the essay and trait. Every unordered pair whose
    specificity scores differ yields one pair (higher chosen); ties are
    dropped because they carry no ranking signal. Three variants therefore
    produce at most three pairs.
    """
    if len(variants) < 2:
        raise DomainError(f"need at least 2 variants to rank, got {len(variants)}")
    traits = {v.trait for v in variants}
    ids = {v.essay_id for v in variants}
    if len(traits) != 1 or ids != {essay.essay_id}:
        raise DomainError("variants must share one essay and one trait")
    trait = variants[0].trait

    scores = [
        candidate_specificity(essay, v.text, extractor, config, complete).f1
        for v in variants
    ]
    pairs: list[PreferencePair] = []
    for i in range(len(variants)):
        for j in range(i + 1, len(variants)):
            if scores[i] == scores[j]:
                continue
            hi, lo = (i, j) if scores[i] > scores[j] else (j, i)
            pairs.append(
                PreferencePair(
                    source=PairSource.SPEC_EVAL,
                    context=essay.text,
                    chosen=variants[hi].text,
                    rejected=variants[lo].text,
                    meta={
                        "essay_id": essay.essay_id,
                        "trait": trait.value,
                        "chosen_f1": scores[hi],
                        "rejected_f1": scores[lo],
                        "chosen_setting": variants[hi].setting.value,
                        "rejected_setting": variants[lo].setting.value,
                        "extractor": extractor.value,
                    },
                )
            )
    return pairs


def speceval_record(pair: PreferencePair) -> dict:
    """JSONL record for one specificity preference pair."""
    meta = pair.meta
    return {
        "essay_id": meta["essay_id"],
        "trait": meta["trait"],
        "chosen": pair.chosen,
        "rejected": pair.rejected,
        "chosen_f1": meta["chosen_f1"],
        "rejected_f1": meta["rejected_f1"],
        "extractor": meta["extractor"],
    }
