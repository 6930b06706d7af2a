"""Run manifests: every CLI output references the manifest that produced it.

The manifest id is a hash of the command, configuration, seed, and input file
hashes only, so identical runs produce identical ids (and byte-identical
outputs); wall-clock timings live in the manifest file itself.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

from sdfplan import __version__

MANIFEST_VERSION = 1


def file_sha256(path: str | Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


@dataclass
class RunManifest:
    command: str
    seed: int
    config: dict = field(default_factory=dict)
    inputs: dict = field(default_factory=dict)  # path -> sha256
    outputs: dict = field(default_factory=dict)  # path -> sha256
    timings: dict = field(default_factory=dict)  # stage -> seconds
    tool_version: str = __version__

    @property
    def manifest_id(self) -> str:
        payload = json.dumps(
            {
                "command": self.command,
                "seed": self.seed,
                "config": self.config,
                "inputs": self.inputs,
                "tool_version": self.tool_version,
            },
            sort_keys=True,
        )
        return hashlib.sha256(payload.encode("utf-8")).hexdigest()[:16]

    def add_input(self, path: str | Path) -> None:
        self.inputs[str(path)] = file_sha256(path)

    def add_output(self, path: str | Path) -> None:
        self.outputs[str(path)] = file_sha256(path)

    def write(self, path: str | Path) -> None:
        doc = {
            "manifest_version": MANIFEST_VERSION,
            "manifest_id": self.manifest_id,
            "command": self.command,
            "seed": self.seed,
            "config": self.config,
            "inputs": self.inputs,
            "outputs": self.outputs,
            "timings": self.timings,
            "tool_version": self.tool_version,
        }
        Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def verify_manifest(path: str | Path) -> dict:
    """Re-hash every recorded output; returns {path: ok} per file."""
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    results = {}
    for out_path, recorded in doc.get("outputs", {}).items():
        try:
            results[out_path] = file_sha256(out_path) == recorded
        except FileNotFoundError:
            results[out_path] = False
    return results
