import math
import random

import mpmath
import pytest

from feedeval.core import Essay, FeedbackCandidate, Rubric, TraitId
from feedeval.errors import DomainError
from feedeval.scorers import BackendKind, Dimension, RawScore
from feedeval.selection import (
    ALL_DIMENSIONS,
    SelectionError,
    SelectionMode,
    audit_record,
    normalize,
    select,
    select_all,
)

mpmath.mp.dps = 50


class TableScorer:
    """Scorer that serves values from a fixed (dimension, feedback) table."""

    kind = BackendKind.MOCK

    def __init__(self, table):
        self.table = table

    def score(self, request):
        value = self.table[(request.dimension, request.feedback_text)]
        return RawScore(value=value, backend=self.kind, dimension=request.dimension)


class FailingScorer:
    kind = BackendKind.MOCK

    def __init__(self, fail_after):
        self.fail_after = fail_after
        self.calls = 0

    def score(self, request):
        self.calls += 1
        if self.calls > self.fail_after:
            raise DomainError("backend exploded")
        return RawScore(0.5, self.kind, request.dimension)


def make_essay():
    return Essay(
        "e1",
        3,
        "The cat sat on the mat. Dogs bark loudly at night.",
        human_scores={
            TraitId.OVERALL: 2,
            TraitId.CONTENT: 2,
            TraitId.PROMPT_ADHERENCE: 1,
            TraitId.NARRATIVITY: 3,
            TraitId.LANGUAGE: 2,
        },
    )


def make_rubric(trait=TraitId.CONTENT):
    return Rubric(3, trait, {i: f"Level {i} description for {trait.value}." for i in range(4)})


def make_candidates(texts, trait=TraitId.CONTENT):
    return [
        FeedbackCandidate("e1", trait, text, sample_index=i)
        for i, text in enumerate(texts)
    ]


def table_for(candidates, raw):
    """raw: {dimension: [v0, v1, ...]} aligned with candidates."""
    table = {}
    for dimension, values in raw.items():
        for candidate, value in zip(candidates, values):
            table[(dimension, candidate.text)] = value
    return table


def run_select(raw, mode=SelectionMode.HIGHEST, dimensions=ALL_DIMENSIONS):
    n = len(next(iter(raw.values())))
    candidates = make_candidates([f"Candidate number {i}." for i in range(n)])
    scorer = TableScorer(table_for(candidates, raw))
    return select(
        make_essay(), candidates, make_rubric(), scorer, mode=mode, dimensions=dimensions
    )



def rand_raw(rng, n):
    """Random raw scores: reward dims unbounded, validity within [0, 1]."""
    return {
        Dimension.SPECIFICITY: [rng.uniform(-5, 5) for _ in range(n)],
        Dimension.HELPFULNESS: [rng.uniform(-5, 5) for _ in range(n)],
        Dimension.VALIDITY: [rng.uniform(0, 1) for _ in range(n)],
    }

# ---------------------------------------------------------------------------
# softmax normalization


def test_normalize_constant_vector_is_uniform():
    for constant in (-7.5, 0.0, 3.25, 1e6):
        result = normalize([constant, constant, constant])
        assert result == pytest.approx([1 / 3, 1 / 3, 1 / 3], abs=1e-15)


def test_normalize_singleton():
    assert normalize([123.4]) == [1.0]


def test_normalize_log_spaced_oracle():
    result = normalize([0.0, math.log(2), math.log(4)])
    # high-precision oracle
    exact = [mpmath.exp(x) for x in (mpmath.mpf(0), mpmath.log(2), mpmath.log(4))]
    total = sum(exact)
    expected = [float(e / total) for e in exact]
    assert result == pytest.approx(expected, abs=1e-15)
    assert result == pytest.approx([1 / 7, 2 / 7, 4 / 7], abs=1e-12)


def test_normalize_sums_to_one_and_positive():
    rng = random.Random(8)
    for _ in range(300):
        values = [rng.uniform(-40, 40) for _ in range(rng.randint(1, 10))]
        result = normalize(values)
        assert all(v > 0 for v in result)
        assert math.fsum(result) == pytest.approx(1.0, abs=1e-9)


def test_normalize_rejects_non_finite():
    with pytest.raises(DomainError):
        normalize([1.0, float("nan")])
    with pytest.raises(DomainError):
        normalize([float("inf"), 0.0])
    with pytest.raises(DomainError):
        normalize([])


# ---------------------------------------------------------------------------
# selection oracle


def softmax_oracle(values):
    exact = [mpmath.exp(mpmath.mpf(repr(v))) for v in values]
    total = sum(exact)
    return [e / total for e in exact]


def select_oracle(raw, dimensions, mode):
    """Brute-force recomputation with arbitrary-precision arithmetic."""
    n = len(raw[dimensions[0]])
    normalized = {d: softmax_oracle(raw[d]) for d in dimensions}
    combined = [
        sum(normalized[d][i] for d in dimensions) / len(dimensions) for i in range(n)
    ]
    best = 0
    for i in range(1, n):
        if mode is SelectionMode.HIGHEST and combined[i] > combined[best]:
            best = i
        if mode is SelectionMode.LOWEST and combined[i] < combined[best]:
            best = i
    return best


def test_singleton_candidate_combined_is_one():
    selected = run_select(
        {
            Dimension.SPECIFICITY: [2.5],
            Dimension.HELPFULNESS: [-1.0],
            Dimension.VALIDITY: [0.4],
        }
    )
    assert selected.index == 0
    assert selected.scores.combined == (1.0,)


def test_dominant_candidate_wins():
    raw = {
        Dimension.SPECIFICITY: [0.1, 0.2, 0.9],
        Dimension.HELPFULNESS: [0.3, 0.1, 0.8],
        Dimension.VALIDITY: [0.2, 0.3, 0.7],
    }
    assert run_select(raw).index == 2
    assert run_select(raw, mode=SelectionMode.LOWEST).index != 2


def test_selection_matches_brute_force_oracle():
    rng = random.Random(202)
    for _ in range(200):
        n = rng.randint(1, 8)
        raw = rand_raw(rng, n)
        mode = rng.choice([SelectionMode.HIGHEST, SelectionMode.LOWEST])
        selected = run_select(raw, mode=mode)
        assert selected.index == select_oracle(raw, list(ALL_DIMENSIONS), mode)


def test_additive_shift_invariance_bit_exact():
    rng = random.Random(55)
    grid = 2**-20  # dyadic grid keeps score+shift exactly representable
    for _ in range(100):
        n = rng.randint(2, 8)
        raw = {
            d: [round(rng.uniform(-8, 8) / grid) * grid for _ in range(n)]
            for d in (Dimension.SPECIFICITY, Dimension.HELPFULNESS)
        }
        raw[Dimension.VALIDITY] = [
            round(rng.uniform(0, 1) / grid) * grid for _ in range(n)
        ]
        base = run_select(raw)
        shifted_dim = rng.choice([Dimension.SPECIFICITY, Dimension.HELPFULNESS])
        shift = float(rng.randint(-4, 4))
        shifted_raw = {
            d: ([v + shift for v in vs] if d is shifted_dim else list(vs))
            for d, vs in raw.items()
        }
        shifted = run_select(shifted_raw)
        assert shifted.index == base.index
        assert shifted.scores.normalized == base.scores.normalized
        assert shifted.scores.combined == base.scores.combined


def test_permutation_equivariance_bit_exact():
    rng = random.Random(66)
    for _ in range(100):
        n = rng.randint(2, 8)
        raw = rand_raw(rng, n)
        base = run_select(raw)
        permutation = list(range(n))
        rng.shuffle(permutation)
        permuted_raw = {d: [vs[p] for p in permutation] for d, vs in raw.items()}
        permuted = run_select(permuted_raw)
        assert [base.scores.combined[p] for p in permutation] == list(
            permuted.scores.combined
        )
        assert permutation[permuted.index] == base.index


def test_exact_ties_resolve_to_lowest_index():
    raw = {d: [1.0, 1.0, 1.0] for d in ALL_DIMENSIONS}
    assert run_select(raw).index == 0
    assert run_select(raw, mode=SelectionMode.LOWEST).index == 0
    raw = {d: [0.25, 1.0, 1.0] for d in ALL_DIMENSIONS}
    assert run_select(raw).index == 1


def test_highest_lowest_pick_distinct_on_tie_free_inputs():
    rng = random.Random(77)
    for _ in range(50):
        n = rng.randint(2, 8)
        raw = rand_raw(rng, n)
        high = run_select(raw, mode=SelectionMode.HIGHEST)
        low = run_select(raw, mode=SelectionMode.LOWEST)
        if len(set(high.scores.combined)) == n:
            assert high.index != low.index


def test_dimension_subset_averages_over_included_only():
    raw = {
        Dimension.SPECIFICITY: [5.0, 0.0],
        Dimension.HELPFULNESS: [0.0, 5.0],
        Dimension.VALIDITY: [0.0, 1.0],
    }
    only_spec = run_select(raw, dimensions=(Dimension.SPECIFICITY,))
    assert only_spec.index == 0
    assert only_spec.scores.dimensions == (Dimension.SPECIFICITY,)
    assert math.fsum(only_spec.scores.combined) == pytest.approx(1.0, abs=1e-12)
    pair = run_select(raw, dimensions=(Dimension.HELPFULNESS, Dimension.VALIDITY))
    assert pair.index == 1


def test_overall_trait_is_rejected():
    candidates = make_candidates(["Text one.", "Text two."], trait=TraitId.OVERALL)
    with pytest.raises(DomainError):
        select(make_essay(), candidates, make_rubric(), TableScorer({}))


def test_empty_candidates_rejected():
    with pytest.raises(DomainError):
        select(make_essay(), [], make_rubric(), TableScorer({}))


def test_scorer_failure_aborts_with_partial_diagnostics():
    candidates = make_candidates(["One.", "Two.", "Three."])
    scorer = FailingScorer(fail_after=4)
    with pytest.raises(SelectionError) as info:
        select(make_essay(), candidates, make_rubric(), scorer)
    assert info.value.trait is TraitId.CONTENT
    assert len(info.value.partial) == 4


def test_validity_request_uses_assigned_level():
    seen = {}

    class RecordingScorer:
        kind = BackendKind.MOCK

        def score(self, request):
            if request.dimension is Dimension.VALIDITY:
                seen["premise"] = request.rubric_description
                seen["level"] = request.evaluated_level
            return RawScore(0.5, self.kind, request.dimension)

    candidates = make_candidates(["Only one."])
    rubric = make_rubric()
    select(make_essay(), candidates, rubric, RecordingScorer())
    assert seen["level"] == 2  # essay's human content score
    assert seen["premise"] == rubric.description(2)


def test_select_all_covers_non_overall_traits():
    essay = make_essay()
    traits = [TraitId.CONTENT, TraitId.PROMPT_ADHERENCE, TraitId.NARRATIVITY, TraitId.LANGUAGE]
    candidate_map = {}
    table = {}
    rng = random.Random(1)
    for trait in traits:
        candidates = make_candidates(
            [f"{trait.value} feedback {i}." for i in range(8)], trait=trait
        )
        candidate_map[trait] = candidates
        table.update(
            table_for(
                candidates,
                {d: [rng.uniform(0, 1) for _ in candidates] for d in ALL_DIMENSIONS},
            )
        )
    rubrics = {trait: make_rubric(trait) for trait in traits}
    selected = select_all(essay, candidate_map, rubrics, TableScorer(table))
    assert set(selected) == set(traits)
    assert all(0 <= s.index < 8 for s in selected.values())


def test_select_all_reports_missing_traits():
    essay = make_essay()
    candidate_map = {TraitId.CONTENT: make_candidates(["Something."])}
    with pytest.raises(DomainError, match="narrativity"):
        select_all(essay, candidate_map, {}, TableScorer({}))


def test_audit_record_shape():
    selected = run_select({d: [0.5, 1.0] for d in ALL_DIMENSIONS})
    record = audit_record("e1", selected)
    assert record["essay_id"] == "e1"
    assert record["chosen_index"] == 1
    assert set(record["raw"]) == {"specificity", "helpfulness", "validity"}
    assert len(record["combined"]) == 2


def test_concurrent_scoring_matches_sequential():
    rng = random.Random(5150)
    raw = rand_raw(rng, 6)
    candidates = make_candidates([f"Candidate number {i}." for i in range(6)])
    scorer = TableScorer(table_for(candidates, raw))
    sequential = select(make_essay(), candidates, make_rubric(), scorer)
    threaded = select(
        make_essay(), candidates, make_rubric(), scorer, max_workers=8
    )
    assert threaded.index == sequential.index
    assert threaded.scores.combined == sequential.scores.combined
