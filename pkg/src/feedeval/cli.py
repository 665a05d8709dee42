"""Command-line surface for the full pipeline.

Every subcommand reads the YAML config (``--config``), writes JSONL
artifacts under the configured output directory, and finishes by writing a
run manifest with the config hash and all input/output checksums.
"""

from __future__ import annotations

import random
import sys
from pathlib import Path

import click

from . import core, datasets, metrics, selection, specificity
from .core import Essay, PromptSetting, TraitId
from .pipeline import (
    PipelineConfig,
    build_training_labels,
    generate_candidates,
    ingest_asap,
    render_prompt,
    run_folds,
    run_revision,
)
from .pipeline import backends as model_backends
from .pipeline.labels import LabelMode
from .pipeline.manifest import file_checksum, write_manifest

_CONFIG_OPTION = click.option(
    "--config",
    "config_path",
    type=click.Path(exists=True, dir_okay=False),
    default=None,
    help="YAML pipeline config; defaults apply when omitted.",
)


def _load_config(config_path: str | None) -> PipelineConfig:
    if config_path is None:
        return PipelineConfig()
    return PipelineConfig.from_file(config_path)


def _load_rubrics(config: PipelineConfig) -> dict[int, dict[TraitId, core.Rubric]]:
    directory = config.rubric_dir or core.default_rubric_dir()
    return core.load_rubric_dir(directory)


def _output_dir(config: PipelineConfig) -> Path:
    path = Path(config.output_dir)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _finish_run(
    config: PipelineConfig,
    inputs: dict[str, str],
    outputs: dict[str, str],
) -> None:
    path = write_manifest(
        _output_dir(config), config.config_hash(), config.seed, inputs, outputs
    )
    click.echo(f"manifest: {path}")


def _load_essays(config: PipelineConfig, path: str | None = None) -> list[Essay]:
    source = path or config.asap_path
    if not source:
        raise click.UsageError("no corpus path: set asap_path in the config")
    report = ingest_asap(source, config)
    if report.errors:
        click.echo(f"{len(report.errors)} row(s) rejected", err=True)
    return report.essays


@click.group()
def main() -> None:
    """Essay-feedback quality evaluation pipeline."""


@main.command()
@_CONFIG_OPTION
@click.argument("corpus", type=click.Path(exists=True, dir_okay=False))
def ingest(config_path, corpus):
    """Validate a TSV corpus and report per-prompt counts."""
    config = _load_config(config_path)
    report = ingest_asap(corpus, config)
    click.echo(report.summary())
    for error in report.errors:
        click.echo(f"  row {error.row} ({error.essay_id}): {error.reason}", err=True)


@main.command()
@_CONFIG_OPTION
@click.argument("corpus", type=click.Path(exists=True, dir_okay=False))
@click.option("--setting", type=click.Choice([s.value for s in PromptSetting]),
              default=PromptSetting.SCORE_RUBRIC.value)
@click.option("--essay-id", default=None, help="Render one essay (default: first).")
def render(config_path, corpus, setting, essay_id):
    """Print the feedback-generation prompt for one essay."""
    config = _load_config(config_path)
    essays = _load_essays(config, corpus)
    if essay_id is not None:
        essays = [e for e in essays if e.essay_id == essay_id]
    if not essays:
        raise click.UsageError("no matching essay")
    essay = essays[0]
    rubrics = _load_rubrics(config).get(essay.prompt_id, {})
    click.echo(render_prompt(essay, PromptSetting(setting), rubrics))


@main.command()
@_CONFIG_OPTION
@click.option("--setting", type=click.Choice([s.value for s in PromptSetting]),
              default=PromptSetting.SCORE_RUBRIC.value)
def generate(config_path, setting):
    """Draw N feedback candidates per essay and trait; write candidates.jsonl."""
    config = _load_config(config_path)
    essays = _load_essays(config)
    rubric_sets = _load_rubrics(config)
    generator = model_backends.make_feedback_generator(
        config.endpoint("feedback_generator"), config.seed
    )
    out = _output_dir(config) / "candidates.jsonl"
    records = []
    failures = 0
    for essay in essays:
        result = generate_candidates(
            essay,
            PromptSetting(setting),
            config.n_candidates,
            config.temperature,
            generator,
            rubric_sets.get(essay.prompt_id),
        )
        failures += len(result.failures)
        for trait, candidates in result.candidates.items():
            for candidate in candidates:
                records.append(
                    {
                        "essay_id": candidate.essay_id,
                        "trait": trait.value,
                        "sample_index": candidate.sample_index,
                        "setting": candidate.setting.value,
                        "temperature": candidate.temperature,
                        "text": candidate.text,
                    }
                )
    report = datasets.emit_jsonl(records, out, "candidates")
    click.echo(f"{report.count} candidate(s) written; {failures} parse failure(s)")
    _finish_run(
        config,
        inputs={"corpus": file_checksum(config.asap_path)} if config.asap_path else {},
        outputs={"candidates.jsonl": report.sha256},
    )


def _candidates_from_file(path: Path) -> dict[str, dict[TraitId, list]]:
    by_essay: dict[str, dict[TraitId, list]] = {}
    for record in datasets.read_jsonl(path):
        trait = TraitId.from_name(record["trait"])
        candidate = core.FeedbackCandidate(
            essay_id=record["essay_id"],
            trait=trait,
            text=record["text"],
            setting=PromptSetting(record.get("setting", "score_rubric")),
            sample_index=int(record.get("sample_index", 0)),
            temperature=float(record.get("temperature", 0.7)),
        )
        by_essay.setdefault(candidate.essay_id, {}).setdefault(trait, []).append(
            candidate
        )
    return by_essay


@main.command()
@_CONFIG_OPTION
@click.option("--mode", type=click.Choice(["highest", "lowest"]), default=None)
def select(config_path, mode):
    """Run feedback selection over generated candidates; write selections.jsonl."""
    config = _load_config(config_path)
    essays = {e.essay_id: e for e in _load_essays(config)}
    rubric_sets = _load_rubrics(config)
    scorer = model_backends.make_dimension_scorer(
        config.endpoint("scorer"), config.seed
    )
    candidates = _candidates_from_file(_output_dir(config) / "candidates.jsonl")
    chosen_mode = selection.SelectionMode(mode or config.selection_mode)
    dimensions = [specificity_dimension(d) for d in config.dimensions]
    records = []
    for essay_id, candidate_map in candidates.items():
        essay = essays.get(essay_id)
        if essay is None:
            continue
        selected = selection.select_all(
            essay,
            candidate_map,
            rubric_sets.get(essay.prompt_id, {}),
            scorer,
            mode=chosen_mode,
            dimensions=dimensions,
            max_workers=config.concurrency,
        )
        for item in selected.values():
            records.append(selection.audit_record(essay_id, item))
    out = _output_dir(config) / f"selections_{chosen_mode.value}.jsonl"
    report = datasets.emit_jsonl(records, out, "selections")
    click.echo(f"{report.count} selection(s) written to {out}")
    _finish_run(config, inputs={}, outputs={out.name: report.sha256})


def specificity_dimension(name: str):
    from .scorers import Dimension

    return Dimension(name)


@main.command(name="score")
@_CONFIG_OPTION
@click.argument("essay_id")
@click.argument("feedback")
@click.option("--dimension", type=click.Choice(["specificity", "helpfulness", "validity"]),
              default="specificity")
def score_command(config_path, essay_id, feedback, dimension):
    """Score one feedback text against one essay on one dimension."""
    from .scorers import Dimension, ScoreRequest

    config = _load_config(config_path)
    essays = {e.essay_id: e for e in _load_essays(config)}
    essay = essays.get(essay_id)
    if essay is None:
        raise click.UsageError(f"no essay {essay_id!r}")
    scorer = model_backends.make_dimension_scorer(
        config.endpoint("scorer"), config.seed
    )
    dim = Dimension(dimension)
    if dim is Dimension.VALIDITY:
        raise click.UsageError("validity scoring needs a trait context; use select")
    request = ScoreRequest(dimension=dim, feedback_text=feedback, essay_text=essay.text)
    result = scorer.score(request)
    click.echo(f"{dimension}: {result.value:.6f} ({result.backend.value})")


@main.command(name="build-speceval")
@_CONFIG_OPTION
@click.option("--extractor", type=click.Choice([e.value for e in specificity.Extractor]),
              default=specificity.Extractor.DETERMINISTIC_FUZZY.value)
def build_speceval(config_path, extractor):
    """Build specificity preference pairs from per-setting feedback variants."""
    config = _load_config(config_path)
    essays = {e.essay_id: e for e in _load_essays(config)}
    candidates = _candidates_from_file(_output_dir(config) / "candidates.jsonl")
    pairs = []
    for essay_id, candidate_map in sorted(candidates.items()):
        essay = essays.get(essay_id)
        if essay is None:
            continue
        for trait in sorted(candidate_map, key=lambda t: t.value):
            variants = candidate_map[trait][:3]
            if len(variants) < 2:
                continue
            pairs.extend(
                specificity.build_speceval_pairs(
                    essay, variants, specificity.Extractor(extractor)
                )
            )
    out = _output_dir(config) / "speceval.jsonl"
    report = datasets.emit_jsonl(
        [specificity.speceval_record(p) for p in pairs], out, "speceval"
    )
    click.echo(f"{report.count} pair(s) written to {out}")
    _finish_run(config, inputs={}, outputs={out.name: report.sha256})


@main.command(name="build-helpfulness")
@_CONFIG_OPTION
@click.argument("records_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--adjacent-only", is_flag=True, default=False)
def build_helpfulness(config_path, records_path, adjacent_only):
    """Build the helpfulness pairwise dataset from source-tagged records."""
    config = _load_config(config_path)
    records = datasets.read_jsonl(records_path)
    pairs = datasets.build_helpfulness_pairs(records, adjacent_only=adjacent_only)
    out = _output_dir(config) / "helpfulness_pairs.jsonl"
    report = datasets.emit_jsonl(
        [datasets.preference_record(p) for p in pairs], out, "helpfulness"
    )
    click.echo(f"{report.count} pair(s) written to {out}")
    _finish_run(
        config,
        inputs={Path(records_path).name: file_checksum(records_path)},
        outputs={out.name: report.sha256},
    )


@main.command(name="build-validity")
@_CONFIG_OPTION
@click.argument("records_path", type=click.Path(exists=True, dir_okay=False))
def build_validity(config_path, records_path):
    """Build the validity NLI dataset from rubric-scored feedback records."""
    config = _load_config(config_path)
    records = datasets.read_jsonl(records_path)
    examples = datasets.build_validity_nli(records, random.Random(config.seed))
    out = _output_dir(config) / "validity_nli.jsonl"
    report = datasets.emit_jsonl(
        [datasets.nli_record(e) for e in examples], out, "validity"
    )
    click.echo(f"{report.count} example(s) written to {out}")
    _finish_run(
        config,
        inputs={Path(records_path).name: file_checksum(records_path)},
        outputs={out.name: report.sha256},
    )


@main.command(name="emit-labels")
@_CONFIG_OPTION
@click.option("--mode", type=click.Choice([m.value for m in LabelMode]),
              default=LabelMode.SCORE_FEEDBACK.value)
@click.option("--quality", type=click.Choice(["highest", "lowest"]), default="highest")
def emit_labels(config_path, mode, quality):
    """Emit training labels from stored selections."""
    config = _load_config(config_path)
    essays = _load_essays(config)
    selections_path = _output_dir(config) / f"selections_{quality}.jsonl"
    selected_text: dict[str, dict[TraitId, str]] = {}
    candidates = _candidates_from_file(_output_dir(config) / "candidates.jsonl")
    for record in datasets.read_jsonl(selections_path):
        trait = TraitId.from_name(record["trait"])
        pool = candidates[record["essay_id"]][trait]
        selected_text.setdefault(record["essay_id"], {})[trait] = pool[
            record["chosen_index"]
        ].text
    out = _output_dir(config) / f"labels_{quality}_{mode}.jsonl"
    records = [
        build_training_labels(essay, selected_text.get(essay.essay_id, {}), LabelMode(mode))
        for essay in essays
    ]
    report = datasets.emit_jsonl(records, out, f"labels/{mode}")
    click.echo(f"{report.count} label record(s) written to {out}")
    _finish_run(config, inputs={}, outputs={out.name: report.sha256})


@main.command()
@_CONFIG_OPTION
def folds(config_path):
    """Assign seeded folds and evaluate the scoring model with QWK."""
    config = _load_config(config_path)
    essays = _load_essays(config)
    scoring_model = model_backends.make_scoring_model(config.endpoint("scoring_model"))
    report = run_folds(essays, config.fold_count, config.seed, scoring_model)
    click.echo(report.table())
    for message in report.skipped:
        click.echo(f"  skipped: {message}", err=True)


@main.command(name="eval-qwk")
@click.argument("gold_path", type=click.Path(exists=True, dir_okay=False))
@click.argument("predicted_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--lo", type=int, required=True)
@click.option("--hi", type=int, required=True)
def eval_qwk(gold_path, predicted_path, lo, hi):
    """QWK between two JSONL score files (one integer field 'score' per line)."""
    gold = [int(r["score"]) for r in datasets.read_jsonl(gold_path)]
    predicted = [int(r["score"]) for r in datasets.read_jsonl(predicted_path)]
    click.echo(f"qwk: {metrics.qwk(gold, predicted, lo, hi):.6f}")


@main.command(name="eval-alignment")
@click.argument("judgments_path", type=click.Path(exists=True, dir_okay=False))
def eval_alignment(judgments_path):
    """Pairwise alignment accuracy/F1 from a JSONL of gold/predicted winners."""
    judgments = [
        metrics.PairwiseJudgment(
            item_id=str(record.get("item_id", i)),
            gold_winner=metrics.Winner(record["gold_winner"]),
            predicted_winner=metrics.Winner(record["predicted_winner"]),
            dimension=record.get("dimension", ""),
        )
        for i, record in enumerate(datasets.read_jsonl(judgments_path))
    ]
    scores = metrics.pairwise_alignment(judgments)
    click.echo(
        f"accuracy: {scores.accuracy:.4f}  f1: {scores.f1:.4f}  "
        f"f1_macro: {scores.f1_macro:.4f}"
    )


@main.command()
@_CONFIG_OPTION
@click.argument("feedback_path", type=click.Path(exists=True, dir_okay=False))
def revise(config_path, feedback_path):
    """Run the revision harness over labeled high/low feedback sets.

    FEEDBACK_PATH is JSONL with {essay_id, condition, feedback: {trait: text}}.
    """
    config = _load_config(config_path)
    essays = _load_essays(config)
    revision_model = model_backends.make_revision_model(
        config.endpoint("revision_model")
    )
    scoring_model = model_backends.make_scoring_model(config.endpoint("scoring_model"))
    feedback_sets: dict[str, dict[str, dict[TraitId, str]]] = {}
    for record in datasets.read_jsonl(feedback_path):
        condition = record["condition"]
        feedback_sets.setdefault(condition, {})[record["essay_id"]] = {
            TraitId.from_name(name): text
            for name, text in record["feedback"].items()
        }
    report = run_revision(
        essays,
        feedback_sets,
        revision_model,
        scoring_model,
        temperature=config.temperature,
        max_new_tokens=config.max_revision_tokens,
    )
    for condition in sorted(feedback_sets):
        deltas = report.mean_deltas(condition)
        rendered = ", ".join(
            f"{t.value}: {d:+.3f}" for t, d in sorted(deltas.items(), key=lambda x: x[0].value)
        )
        click.echo(f"{condition}: {rendered or 'no results'}")
    for message in report.skipped:
        click.echo(f"  skipped: {message}", err=True)


@main.command()
@_CONFIG_OPTION
@click.option("--host", default="127.0.0.1")
@click.option("--port", type=int, default=8000)
@click.option("--log-path", type=click.Path(dir_okay=False), default="annotation_log.jsonl")
@click.option("--tasks-path", type=click.Path(exists=True, dir_okay=False), default=None)
@click.option("--static-dir", type=click.Path(file_okay=False), default=None)
def serve(config_path, host, port, log_path, tasks_path, static_dir):
    """Run the annotation service."""
    import uvicorn

    from .service import AnnotationStore, create_app

    config = _load_config(config_path)
    store = AnnotationStore(log_path, seed=config.seed)
    if tasks_path and not store.tasks:
        created = store.load_task_definitions(datasets.read_jsonl(tasks_path))
        click.echo(f"loaded {created} task(s)")
    uvicorn.run(create_app(store, static_dir), host=host, port=port)


if __name__ == "__main__":
    sys.exit(main())
