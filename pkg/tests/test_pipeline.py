import json
import random

import pytest

from feedeval.core import Essay, PromptSetting, TraitId, traits_for_prompt
from feedeval.errors import DomainError, EmissionError, ProtocolError
from feedeval.pipeline import (
    PipelineConfig,
    assign_folds,
    build_training_labels,
    generate_candidates,
    ingest_asap,
    manifest_hash,
    parse_answer_document,
    run_folds,
    run_revision,
    write_manifest,
)
from feedeval.pipeline.backends import (
    ConstantScoringModel,
    GoldEchoScoringModel,
    IdentityRevisionModel,
    MarkerAppendingRevisionModel,
    MarkerBonusScoringModel,
    MockFeedbackGenerator,
)
from feedeval.pipeline.config import EndpointDescriptor
from feedeval.pipeline.generate import parse_score_document
from feedeval.pipeline.labels import LabelMode, emit_training_labels
from feedeval.pipeline.manifest import read_manifest


# ---------------------------------------------------------------------------
# config


def test_config_validation():
    with pytest.raises(DomainError):
        PipelineConfig(n_candidates=0)
    with pytest.raises(DomainError):
        PipelineConfig(temperature=-0.1)
    with pytest.raises(DomainError):
        PipelineConfig(fold_count=1)
    with pytest.raises(DomainError):
        PipelineConfig(endpoints={"mystery_role": EndpointDescriptor()})
    with pytest.raises(DomainError):
        EndpointDescriptor(kind="endpoint")  # url required


def test_config_from_file_and_hash(tmp_path):
    path = tmp_path / "config.yaml"
    path.write_text(
        "seed: 11\n"
        "n_candidates: 4\n"
        "endpoints:\n"
        "  scorer: {kind: heuristic}\n"
        "columns: {prompt_id: essay_set}\n",
        encoding="utf-8",
    )
    config = PipelineConfig.from_file(path)
    assert config.seed == 11
    assert config.endpoint("scorer").kind == "heuristic"
    assert config.endpoint("revision_model").kind == "mock"  # defaulted
    assert config.config_hash() == PipelineConfig.from_file(path).config_hash()
    assert config.config_hash() != PipelineConfig().config_hash()


# ---------------------------------------------------------------------------
# ingestion


def test_ingest_counts_and_validation(corpus_factory):
    path, _ = corpus_factory(n_per_prompt=3)
    report = ingest_asap(path, PipelineConfig())
    assert len(report.essays) == 18
    assert report.per_prompt == {p: 3 for p in range(1, 7)}
    assert report.errors == []
    essay = report.essays[0]
    assert set(essay.human_scores) == set(traits_for_prompt(essay.prompt_id))


def test_ingest_rejects_bad_rows(tmp_path):
    path = tmp_path / "bad.tsv"
    path.write_text(
        "essay_id\tessay_set\tessay\tcontent\toverall\n"
        "ok\t1\tFine essay text.\t4\t8\n"
        "bad_score\t1\tFine essay text.\t9\t8\n"  # content range is [1, 6]
        "bad_prompt\t7\tFine essay text.\t4\t8\n"
        "bad_float\t1\tFine essay text.\t3.5\t8\n"  # non-integer reported, not rounded
        "empty_text\t1\t\t4\t8\n",
        encoding="utf-8",
    )
    report = ingest_asap(path, PipelineConfig())
    assert [e.essay_id for e in report.essays] == ["ok"]
    assert len(report.errors) == 4
    reasons = " | ".join(e.reason for e in report.errors)
    assert "outside" in reasons
    assert "1..6" in reasons
    assert "not an integer" in reasons


def test_ingest_empty_file(tmp_path):
    path = tmp_path / "empty.tsv"
    path.write_text("", encoding="utf-8")
    report = ingest_asap(path, PipelineConfig())
    assert report.essays == []
    assert report.errors == []


# ---------------------------------------------------------------------------
# answer parsing


PROMPT3_TRAITS = [t for t in traits_for_prompt(3) if t is not TraitId.OVERALL]


def test_parse_double_quoted_json():
    text = 'Sure! {"content": "Good ideas.", "language": "Fix grammar."} Done.'
    parsed = parse_answer_document(text, PROMPT3_TRAITS)
    assert parsed[TraitId.CONTENT] == "Good ideas."
    assert TraitId.NARRATIVITY not in parsed


def test_parse_single_quoted_document():
    text = "{'content': 'Good ideas.', 'narrativity': 'Nice flow.'}"
    parsed = parse_answer_document(text, PROMPT3_TRAITS)
    assert parsed[TraitId.NARRATIVITY] == "Nice flow."


def test_parse_missing_key_invalidates_that_trait_only():
    text = json.dumps({t.value: f"Feedback for {t.value}." for t in PROMPT3_TRAITS[:-1]})
    parsed = parse_answer_document(text, PROMPT3_TRAITS)
    assert set(parsed) == set(PROMPT3_TRAITS[:-1])


def test_parse_no_braces_is_protocol_error():
    with pytest.raises(ProtocolError):
        parse_answer_document("no object here", PROMPT3_TRAITS)
    with pytest.raises(ProtocolError):
        parse_answer_document("{broken", PROMPT3_TRAITS)


def test_parse_score_document_accepts_bare_and_nested():
    traits = list(traits_for_prompt(1))
    text = "{'content': 4.0, 'overall': {'score': 9, 'feedback': 'nan'}}"
    scores = parse_score_document(text, traits)
    assert scores[TraitId.CONTENT] == 4.0
    assert scores[TraitId.OVERALL] == 9.0
    with pytest.raises(ProtocolError):
        parse_score_document("{'content': 'high'}", traits)


# ---------------------------------------------------------------------------
# candidate generation


def make_essay(prompt_id=3, essay_id="e1"):
    from feedeval.core import score_range

    scores = {}
    for trait in traits_for_prompt(prompt_id):
        lo, hi = score_range(prompt_id, trait)
        scores[trait] = lo + 1 if hi > lo else lo
    return Essay(
        essay_id,
        prompt_id,
        "The essay text goes here. It has two sentences.",
        human_scores=scores,
    )


def test_generate_eight_candidates_per_trait():
    essay = make_essay()
    result = generate_candidates(
        essay, PromptSetting.SCORE_RUBRIC, 8, 0.7, MockFeedbackGenerator(seed=1)
    )
    assert set(result.candidates) == set(PROMPT3_TRAITS)
    for trait, candidates in result.candidates.items():
        assert [c.sample_index for c in candidates] == list(range(8))
        assert len({c.text for c in candidates}) == 8  # samples differ
    assert result.failures == []


def test_generate_is_deterministic():
    essay = make_essay()
    first = generate_candidates(
        essay, PromptSetting.SCORE_RUBRIC, 4, 0.7, MockFeedbackGenerator(seed=9)
    )
    second = generate_candidates(
        essay, PromptSetting.SCORE_RUBRIC, 4, 0.7, MockFeedbackGenerator(seed=9)
    )
    assert first.candidates == second.candidates


class EchoGenerator:
    """Returns a fixed document regardless of inputs."""

    def __init__(self, document):
        self.document = document
        self.calls = 0

    def generate(self, essay, setting, sample_index, temperature, rubrics):
        self.calls += 1
        return self.document


def test_fixed_echo_document_yields_identical_candidates():
    document = json.dumps({t.value: "Same feedback text." for t in PROMPT3_TRAITS})
    generator = EchoGenerator(document)
    result = generate_candidates(make_essay(), PromptSetting.SCORE_ONLY, 8, 0.7, generator)
    for candidates in result.candidates.values():
        assert len(candidates) == 8
        assert {c.text for c in candidates} == {"Same feedback text."}
    assert generator.calls == 8  # one parse attempt per sample


def test_sample_missing_trait_key_fails_that_trait_only():
    partial = {t.value: "Text." for t in PROMPT3_TRAITS if t is not TraitId.LANGUAGE}
    generator = EchoGenerator(json.dumps(partial))
    result = generate_candidates(
        make_essay(), PromptSetting.SCORE_ONLY, 2, 0.7, generator, max_attempts=2
    )
    assert len(result.candidates[TraitId.CONTENT]) == 2
    assert result.candidates[TraitId.LANGUAGE] == []
    language_failures = [f for f in result.failures if f.trait is TraitId.LANGUAGE]
    assert len(language_failures) == 2


def test_unparseable_samples_retry_then_record_failures():
    generator = EchoGenerator("complete garbage")
    result = generate_candidates(
        make_essay(), PromptSetting.SCORE_ONLY, 2, 0.7, generator, max_attempts=3
    )
    assert generator.calls == 6  # 2 samples x 3 attempts
    assert all(not c for c in result.candidates.values())
    assert len(result.failures) == 2 * len(PROMPT3_TRAITS)


# ---------------------------------------------------------------------------
# labels


def label_selections(essay):
    return {
        trait: f"Feedback for {trait.value}."
        for trait in traits_for_prompt(essay.prompt_id)
        if trait is not TraitId.OVERALL
    }


def test_label_order_and_overall_nan():
    essay = make_essay(prompt_id=1)
    record = build_training_labels(essay, label_selections(essay))
    keys = list(record["label"])
    assert keys == ["sentence fluency", "word choice", "conventions",
                    "organization", "content", "overall"]
    overall = record["label"]["overall"]
    assert overall["feedback"] == "NAN"
    assert list(overall) == ["score", "feedback"]  # score first


def test_label_prompt3_order():
    essay = make_essay(prompt_id=3)
    record = build_training_labels(essay, label_selections(essay))
    assert list(record["label"]) == ["narrativity", "language", "prompt adherence",
                                     "content", "overall"]


def test_score_only_mode_has_no_feedback():
    essay = make_essay(prompt_id=1)
    record = build_training_labels(essay, {}, LabelMode.SCORE_ONLY)
    assert all(isinstance(v, float) for v in record["label"].values())
    assert "feedback" not in json.dumps(record)


def test_feedback_first_mode_reverses_keys():
    essay = make_essay(prompt_id=3)
    record = build_training_labels(essay, label_selections(essay), LabelMode.FEEDBACK_FIRST)
    narrativity = record["label"]["narrativity"]
    assert list(narrativity) == ["feedback", "score"]


def test_missing_selection_is_emission_error():
    essay = make_essay(prompt_id=3)
    with pytest.raises(EmissionError):
        build_training_labels(essay, {})


def test_emit_labels_deterministic(tmp_path):
    essays = [make_essay(3, "a"), make_essay(4, "b")]
    selections = {e.essay_id: label_selections(e) for e in essays}
    first = emit_training_labels(essays, selections, tmp_path / "one.jsonl")
    second = emit_training_labels(essays, selections, tmp_path / "two.jsonl")
    assert first.sha256 == second.sha256
    assert first.count == 2


# ---------------------------------------------------------------------------
# folds


def build_essays(n_per_prompt=10, prompts=(1, 3), seed=3):
    from feedeval.core import score_range

    rng = random.Random(seed)
    essays = []
    for prompt_id in prompts:
        for i in range(n_per_prompt):
            scores = {}
            for trait in traits_for_prompt(prompt_id):
                lo, hi = score_range(prompt_id, trait)
                scores[trait] = lo + (i % (hi - lo + 1))
            essays.append(
                Essay(
                    f"p{prompt_id}e{i}",
                    prompt_id,
                    "Essay sentence one. Essay sentence two.",
                    human_scores=scores,
                )
            )
    return essays


def test_fold_assignment_deterministic_and_stratified():
    essays = build_essays(n_per_prompt=10)
    first = assign_folds(essays, 5, seed=42)
    second = assign_folds(essays, 5, seed=42)
    assert first == second
    assert assign_folds(essays, 5, seed=43) != first
    for prompt_id in (1, 3):
        for fold in range(5):
            members = [
                e for e, f in zip(essays, first)
                if f == fold and e.prompt_id == prompt_id
            ]
            assert len(members) == 2  # 10 essays per prompt over 5 folds


def test_fold_sizes_with_remainder():
    essays = build_essays(n_per_prompt=7, prompts=(1,))
    assignment = assign_folds(essays, 5, seed=0)
    sizes = [assignment.count(f) for f in range(5)]
    assert sum(sizes) == 7
    assert max(sizes) - min(sizes) <= 1


def test_gold_echo_models_scores_all_ones():
    essays = build_essays(n_per_prompt=10)
    report = run_folds(essays, 5, seed=42, scoring_model=GoldEchoScoringModel())
    assert report.scores, "expected at least one (prompt, trait) entry"
    for values in report.scores.values():
        assert values == [1.0] * len(values)


def test_degenerate_series_skipped_not_fatal():
    essays = []
    for i in range(6):
        essays.append(
            Essay(
                f"e{i}",
                3,
                "Essay text here.",
                human_scores={t: 1 for t in traits_for_prompt(3)},
            )
        )
    report = run_folds(essays, 2, seed=0, scoring_model=GoldEchoScoringModel())
    assert report.scores == {}
    assert report.skipped


# ---------------------------------------------------------------------------
# revision harness


def feedback_sets_for(essays):
    return {
        "high": {
            e.essay_id: {
                t: f"Improve {t.value} by tightening structure."
                for t in traits_for_prompt(e.prompt_id)
                if t is not TraitId.OVERALL
            }
            for e in essays
        }
    }


def test_constant_scorer_gives_zero_deltas():
    essays = build_essays(n_per_prompt=3, prompts=(3,))
    report = run_revision(
        essays,
        feedback_sets_for(essays),
        MarkerAppendingRevisionModel("[REVISED]"),
        ConstantScoringModel(2.0),
    )
    for entry in report.results:
        assert all(delta == 0.0 for delta in entry.deltas.values())


def test_identity_revision_gives_zero_deltas():
    essays = build_essays(n_per_prompt=3, prompts=(3,))
    report = run_revision(
        essays,
        feedback_sets_for(essays),
        IdentityRevisionModel(),
        MarkerBonusScoringModel(ConstantScoringModel(1.0), marker="[REVISED]"),
    )
    assert report.results
    for entry in report.results:
        assert all(delta == 0.0 for delta in entry.deltas.values())


def test_marker_revision_with_keyed_scorer_gives_plus_one():
    essays = build_essays(n_per_prompt=3, prompts=(3,))
    report = run_revision(
        essays,
        feedback_sets_for(essays),
        MarkerAppendingRevisionModel("[REVISED]"),
        MarkerBonusScoringModel(ConstantScoringModel(1.0), marker="[REVISED]", bonus=1.0),
    )
    assert report.results
    for entry in report.results:
        assert all(delta == 1.0 for delta in entry.deltas.values())
    means = report.mean_deltas("high")
    assert all(value == 1.0 for value in means.values())


def test_revision_failure_skips_essay_in_condition():
    essays = build_essays(n_per_prompt=2, prompts=(3,))

    class FlakyRevision:
        def __init__(self):
            self.calls = 0

        def revise(self, essay, feedback, temperature, max_new_tokens):
            self.calls += 1
            if self.calls == 1:
                from feedeval.errors import TransportError

                raise TransportError("endpoint down", attempts=3)
            return essay.text

    report = run_revision(
        essays, feedback_sets_for(essays), FlakyRevision(), ConstantScoringModel(1.0)
    )
    assert len(report.results) == 1
    assert len(report.skipped) == 1


# ---------------------------------------------------------------------------
# manifest


def test_manifest_round_trip_and_hash(tmp_path):
    path = write_manifest(tmp_path, "confighash", 42, {"in.tsv": "aaa"}, {"out.jsonl": "bbb"})
    manifest = read_manifest(tmp_path)
    assert path.name == "manifest.json"
    assert manifest["seed"] == 42
    body = {k: v for k, v in manifest.items() if k != "manifest_hash"}
    assert manifest["manifest_hash"] == manifest_hash(body)


def test_manifest_identical_for_identical_runs(tmp_path):
    a = tmp_path / "a"
    b = tmp_path / "b"
    write_manifest(a, "h", 42, {"x": "1"}, {"y": "2"})
    write_manifest(b, "h", 42, {"x": "1"}, {"y": "2"})
    assert read_manifest(a)["manifest_hash"] == read_manifest(b)["manifest_hash"]
    write_manifest(b, "h", 43, {"x": "1"}, {"y": "2"})
    assert read_manifest(a)["manifest_hash"] != read_manifest(b)["manifest_hash"]
