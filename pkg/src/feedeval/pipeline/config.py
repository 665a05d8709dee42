"""Pipeline configuration: one YAML file drives a fully reproducible run."""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import yaml

from ..errors import DomainError

__all__ = ["EndpointDescriptor", "PipelineConfig", "ROLES"]

ROLES = ("feedback_generator", "scorer", "revision_model", "scoring_model")

# Default ASAP++ TSV column names; remap in the config for other layouts.
DEFAULT_COLUMNS = {
    "essay_id": "essay_id",
    "prompt_id": "essay_set",
    "text": "essay",
    "excerpt": "excerpt",
    "overall": "overall",
    "content": "content",
    "word choice": "word_choice",
    "organization": "organization",
    "sentence fluency": "sentence_fluency",
    "conventions": "conventions",
    "prompt adherence": "prompt_adherence",
    "narrativity": "narrativity",
    "language": "language",
}


@dataclass(frozen=True)
class EndpointDescriptor:
    """One model role: a remote endpoint, or an offline mock/heuristic stand-in."""

    kind: str = "mock"  # endpoint | mock | heuristic
    url: str | None = None
    model: str | None = None
    credential_env: str | None = None
    structured: bool = False
    score_field: str = "score"
    timeout: float = 30.0
    max_attempts: int = 3
    base_delay: float = 0.5

    def __post_init__(self) -> None:
        if self.kind not in ("endpoint", "mock", "heuristic"):
            raise DomainError(f"unknown backend kind {self.kind!r}")
        if self.kind == "endpoint" and not self.url:
            raise DomainError("endpoint backends need a url")


@dataclass(frozen=True)
class PipelineConfig:
    output_dir: str = "out"
    asap_path: str | None = None
    rubric_dir: str | None = None  # defaults to the packaged rubric documents
    endpoints: dict[str, EndpointDescriptor] = field(default_factory=dict)
    n_candidates: int = 8
    temperature: float = 0.7
    seed: int = 42
    fold_count: int = 5
    selection_mode: str = "highest"
    dimensions: tuple[str, ...] = ("specificity", "helpfulness", "validity")
    concurrency: int = 8
    max_revision_tokens: int = 1000
    columns: dict[str, str] = field(default_factory=lambda: dict(DEFAULT_COLUMNS))

    def __post_init__(self) -> None:
        if self.n_candidates < 1:
            raise DomainError(f"n_candidates must be >= 1, got {self.n_candidates}")
        if self.temperature < 0:
            raise DomainError(f"temperature must be >= 0, got {self.temperature}")
        if self.fold_count < 2:
            raise DomainError(f"fold_count must be >= 2, got {self.fold_count}")
        if self.selection_mode not in ("highest", "lowest"):
            raise DomainError(f"unknown selection mode {self.selection_mode!r}")
        if not self.dimensions:
            raise DomainError("at least one dimension is required")
        for role in self.endpoints:
            if role not in ROLES:
                raise DomainError(f"unknown endpoint role {role!r}")

    def endpoint(self, role: str) -> EndpointDescriptor:
        if role not in ROLES:
            raise DomainError(f"unknown endpoint role {role!r}")
        return self.endpoints.get(role, EndpointDescriptor())

    @classmethod
    def from_file(cls, path: str | Path) -> "PipelineConfig":
        raw = yaml.safe_load(Path(path).read_text(encoding="utf-8")) or {}
        return cls.from_dict(raw)

    @classmethod
    def from_dict(cls, raw: dict) -> "PipelineConfig":
        data = dict(raw)
        endpoints = {
            role: EndpointDescriptor(**desc)
            for role, desc in (data.pop("endpoints", {}) or {}).items()
        }
        if "dimensions" in data:
            data["dimensions"] = tuple(data["dimensions"])
        if "columns" in data:
            columns = dict(DEFAULT_COLUMNS)
            columns.update(data["columns"])
            data["columns"] = columns
        return cls(endpoints=endpoints, **data)

    def canonical(self) -> dict:
        """JSON-ready dict of the semantic configuration, for hashing.

        Filesystem locations (output_dir, asap_path, rubric_dir) are
        excluded: relocating a run does not change what it computes, and
        input content enters the manifest through checksums.
        """
        data = asdict(self)
        for path_field in ("output_dir", "asap_path", "rubric_dir"):
            data.pop(path_field)
        data["endpoints"] = {
            role: asdict(desc) for role, desc in sorted(self.endpoints.items())
        }
        data["dimensions"] = list(self.dimensions)
        return data

    def config_hash(self) -> str:
        canonical = json.dumps(self.canonical(), sort_keys=True, ensure_ascii=False)
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()
