"""Run manifests: every artifact directory records how it was produced.

A manifest stores the command name, the full resolved option snapshot, the
seed, a git-describe string for the code tree, start/finish timestamps, and
the paths of the files the command wrote. Re-running a command from its
manifest with a single worker reproduces the same outputs.
"""

from __future__ import annotations

import json
import subprocess
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

from .errors import MissingArtifact, ParseError

MANIFEST_NAME = "manifest.json"
_FIELDS = ("command", "options", "seed", "git_describe", "created_at",
           "finished_at", "outputs")


@dataclass
class RunManifest:
    command: str
    options: dict
    seed: int
    git_describe: str = "unknown"
    created_at: str = ""
    finished_at: str = ""
    outputs: list = field(default_factory=list)

    def to_json(self):
        data = {name: getattr(self, name) for name in _FIELDS}
        return json.dumps(data, indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_json(cls, text):
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ParseError(f"manifest is not valid JSON: {exc}") from exc
        if not isinstance(data, dict):
            raise ParseError("manifest must be a JSON object")
        missing = [name for name in ("command", "options", "seed")
                   if name not in data]
        if missing:
            raise ParseError(f"manifest missing keys: {', '.join(missing)}")
        return cls(**{name: data[name] for name in _FIELDS if name in data})


def utc_now():
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def describe_tree():
    """git describe of the source tree, or 'unknown' outside a checkout."""
    here = Path(__file__).resolve().parent
    try:
        out = subprocess.run(
            ["git", "describe", "--always", "--dirty"],
            cwd=here, capture_output=True, text=True, timeout=10,
        )
    except (OSError, subprocess.TimeoutExpired):
        return "unknown"
    if out.returncode != 0:
        return "unknown"
    return out.stdout.strip() or "unknown"


def write_manifest(out_dir, manifest):
    """Write the directory's single manifest file and return its path."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / MANIFEST_NAME
    path.write_text(manifest.to_json(), encoding="utf-8")
    return path


def read_manifest(path):
    """Load a manifest from its file or from a directory containing one."""
    path = Path(path)
    if path.is_dir():
        path = path / MANIFEST_NAME
    if not path.is_file():
        raise MissingArtifact(f"no manifest at {path}")
    return RunManifest.from_json(path.read_text(encoding="utf-8"))
