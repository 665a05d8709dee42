"""Orchestration: ingestion, prompt rendering, candidate generation,
selection runs, label emission, fold evaluation, and the revision harness."""

from .config import EndpointDescriptor, PipelineConfig
from .ingest import IngestReport, ingest_asap
from .prompts import render_prompt
from .generate import GenerationResult, generate_candidates, parse_answer_document
from .labels import LabelMode, build_training_labels, emit_training_labels
from .folds import FoldReport, assign_folds, run_folds
from .revision import RevisionReport, run_revision
from .manifest import file_checksum, manifest_hash, write_manifest

__all__ = [
    "EndpointDescriptor",
    "PipelineConfig",
    "IngestReport",
    "ingest_asap",
    "render_prompt",
    "GenerationResult",
    "generate_candidates",
    "parse_answer_document",
    "LabelMode",
    "build_training_labels",
    "emit_training_labels",
    "FoldReport",
    "assign_folds",
    "run_folds",
    "RevisionReport",
    "run_revision",
    "file_checksum",
    "manifest_hash",
    "write_manifest",
]
