import random

import pytest

from feedeval.core import score_range, traits_for_prompt

TEXT_BANK = [
    "The morning began with heavy rain.",
    "@PERSON1 carried the old notebook everywhere.",
    "Computers help students research faraway places.",
    "The library smelled like dust and paper.",
    "Nobody expected the ending to change.",
    "Writing every day builds stronger habits.",
    "The argument relied on a single example.",
    "Details about the journey made it vivid.",
]


def synthetic_essay_row(rng, essay_id, prompt_id, columns):
    """One TSV row dict for a synthetic ASAP++-shaped corpus."""
    sentences = rng.sample(TEXT_BANK, k=rng.randint(3, 5))
    row = {
        columns["essay_id"]: essay_id,
        columns["prompt_id"]: str(prompt_id),
        columns["text"]: " ".join(sentences),
        columns["excerpt"]: "A short excerpt from the source material.",
    }
    for trait in traits_for_prompt(prompt_id):
        lo, hi = score_range(prompt_id, trait)
        row[columns[trait.value]] = str(rng.randint(lo, hi))
    return row


def write_corpus(path, rows, columns):
    header = list(dict.fromkeys(key for row in rows for key in row))
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\t".join(header) + "\n")
        for row in rows:
            fh.write("\t".join(row.get(column, "") for column in header) + "\n")
    return path


@pytest.fixture
def corpus_factory(tmp_path):
    """Build a synthetic corpus TSV; returns (path, columns)."""

    def build(n_per_prompt=2, prompts=(1, 2, 3, 4, 5, 6), seed=7, name="corpus.tsv"):
        from feedeval.pipeline.config import DEFAULT_COLUMNS

        rng = random.Random(seed)
        rows = []
        for prompt_id in prompts:
            for i in range(n_per_prompt):
                rows.append(
                    synthetic_essay_row(
                        rng, f"p{prompt_id}e{i}", prompt_id, DEFAULT_COLUMNS
                    )
                )
        path = tmp_path / name
        write_corpus(path, rows, DEFAULT_COLUMNS)
        return path, DEFAULT_COLUMNS

    return build
