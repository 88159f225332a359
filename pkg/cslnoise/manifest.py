"""
Run Manifest
============
Provenance record written next to every artifact set.

The manifest lists the command, the config file and its digest, the seed,
the tool version, the digests of all inputs and outputs, and wall-clock
timestamps. Output digests never include ``manifest.json`` itself, so two
identical runs share their ``outputs`` block even though timestamps differ.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Dict, Iterable, List, Optional

from cslnoise import __version__
from cslnoise.errors import PreconditionError
from cslnoise.io import write_json
from cslnoise.utils_hash import sha256_file, sha256_text

MANIFEST_NAME = "manifest.json"


def _now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def digest_tree(root: Path) -> Dict[str, str]:
    """sha256 of every file below ``root`` keyed by posix relative path."""
    root = Path(root)
    out: Dict[str, str] = {}
    for p in sorted(root.rglob("*")):
        if p.is_file() and p.name != MANIFEST_NAME:
            out[p.relative_to(root).as_posix()] = sha256_file(p)
    return out


@dataclass
class RunManifest:
    command: str
    argv: List[str] = field(default_factory=list)
    config_path: Optional[str] = None
    config_sha256: Optional[str] = None
    seed: Optional[int] = None
    version: str = __version__
    inputs: Dict[str, str] = field(default_factory=dict)
    outputs: Dict[str, str] = field(default_factory=dict)
    started_at: str = field(default_factory=_now)
    finished_at: Optional[str] = None

    @classmethod
    def start(
        cls,
        command: str,
        argv: Iterable[str] = (),
        config_path: Optional[Path] = None,
        seed: Optional[int] = None,
        inputs: Iterable[Path] = (),
    ) -> "RunManifest":
        m = cls(command=command, argv=[str(a) for a in argv], seed=seed)
        if config_path is not None and Path(config_path).exists():
            m.config_path = str(config_path)
            m.config_sha256 = sha256_file(Path(config_path))
        for p in inputs:
            m.add_input(Path(p))
        return m

    def add_input(self, path: Path) -> None:
        if not path.exists():
            raise PreconditionError("input file not found", details={"path": str(path)})
        self.inputs[str(path)] = sha256_file(path)

    def finish(self, out_dir: Path) -> Path:
        """Hash everything in ``out_dir`` and write the manifest there."""
        out_dir = Path(out_dir)
        self.outputs = digest_tree(out_dir)
        self.finished_at = _now()
        return write_json(asdict(self), out_dir / MANIFEST_NAME)

    def output_digest(self) -> str:
        """One digest over all outputs; equal for reproducible runs."""
        return sha256_text(json.dumps(self.outputs, sort_keys=True))

    @classmethod
    def load(cls, path: Path) -> "RunManifest":
        path = Path(path)
        if path.is_dir():
            path = path / MANIFEST_NAME
        if not path.exists():
            raise PreconditionError("manifest not found", details={"path": str(path)})
        return cls(**json.loads(path.read_text(encoding="utf-8")))

    def verify(self, out_dir: Path) -> Dict[str, str]:
        """
        Compare ``out_dir`` against the recorded output digests.

        Returns:
            Dict of changed files: {path: "modified"|"deleted"|"new"}
        """
        current = digest_tree(Path(out_dir))
        changes = {}
        for rel, digest in self.outputs.items():
            if rel not in current:
                changes[rel] = "deleted"
            elif current[rel] != digest:
                changes[rel] = "modified"
        for rel in current:
            if rel not in self.outputs:
                changes[rel] = "new"
        return changes
