"""Run manifests: every produced artifact gets a JSON record of the configs,
seeds, and inputs that produced it, so artifacts stay reproducible."""

from __future__ import annotations

import hashlib
import json
from pathlib import Path

TOOL_VERSION = "safealt/0.1.0"


def sha256_of_dict(d: dict) -> str:
    return hashlib.sha256(json.dumps(d, sort_keys=True).encode()).hexdigest()


def sha256_of_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def write_manifest(artifact_path, *, command: str, configs: dict | None = None,
                   inputs: dict | None = None, seeds: dict | None = None,
                   settings: dict | None = None) -> Path:
    """Write <artifact>.manifest.json next to the artifact."""
    doc = {
        "tool_version": TOOL_VERSION,
        "command": command,
        "artifact": Path(artifact_path).name,
        "config_hashes": {k: sha256_of_dict(v) for k, v in (configs or {}).items()},
        "input_hashes": {k: sha256_of_file(v) for k, v in (inputs or {}).items()
                         if Path(v).exists()},
        "seeds": seeds or {},
        "settings": settings or {},
    }
    out = Path(str(artifact_path) + ".manifest.json")
    out.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    return out
