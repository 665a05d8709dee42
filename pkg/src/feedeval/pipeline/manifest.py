"""Run manifests: config hash, seed, and input/output checksums."""

from __future__ import annotations

import hashlib
import json
import os
from pathlib import Path
from typing import Mapping

__all__ = ["file_checksum", "write_manifest", "manifest_hash", "read_manifest"]


def file_checksum(path: str | Path) -> str:
    digest = hashlib.sha256()
    with Path(path).open("rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            digest.update(chunk)
    return digest.hexdigest()


def manifest_hash(manifest: Mapping) -> str:
    canonical = json.dumps(manifest, sort_keys=True, ensure_ascii=False)
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def write_manifest(
    output_dir: str | Path,
    config_hash: str,
    seed: int,
    inputs: Mapping[str, str],
    outputs: Mapping[str, str],
) -> Path:
    """Write ``manifest.json`` atomically (it is always the run's last write)."""
    output_dir = Path(output_dir)
    output_dir.mkdir(parents=True, exist_ok=True)
    manifest = {
        "config_hash": config_hash,
        "seed": seed,
        "inputs": dict(sorted(inputs.items())),
        "outputs": dict(sorted(outputs.items())),
    }
    manifest["manifest_hash"] = manifest_hash(manifest)
    target = output_dir / "manifest.json"
    temporary = output_dir / ".manifest.json.tmp"
    temporary.write_text(
        json.dumps(manifest, indent=2, sort_keys=True, ensure_ascii=False) + "\n",
        encoding="utf-8",
    )
    os.replace(temporary, target)
    return target


def read_manifest(output_dir: str | Path) -> dict:
    return json.loads((Path(output_dir) / "manifest.json").read_text(encoding="utf-8"))
