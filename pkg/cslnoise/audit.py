"""
Audit Trail
===========
Append-only log of every command the CLI runs.

Each line is ``timestamp|operation|status|summary|details``. The log lives
in the work directory (``$CSLNOISE_WORKDIR``, default ``.cslnoise/``) and is
never rewritten.
"""

from __future__ import annotations

import os
from dataclasses import dataclass
from datetime import datetime
from pathlib import Path
from typing import Dict, List, Optional

WORKDIR_ENV = "CSLNOISE_WORKDIR"
DEFAULT_WORKDIR = ".cslnoise"


def workdir() -> Path:
    return Path(os.environ.get(WORKDIR_ENV, DEFAULT_WORKDIR))


@dataclass
class AuditEntry:
    timestamp: str
    operation: str
    status: str  # "SUCCESS", "FAILED"
    summary: str
    details: Optional[str] = None


def _field(text: str) -> str:
    return text.replace("|", " ").replace("\n", " ")


class AuditTrail:
    """Writes and summarises ``audit.log``."""

    def __init__(self, root: Optional[Path] = None):
        self.root = Path(root) if root is not None else workdir()
        self.root.mkdir(parents=True, exist_ok=True)
        self.log_path = self.root / "audit.log"

    def record(self, operation: str, status: str, summary: str, details: Optional[str] = None) -> AuditEntry:
        entry = AuditEntry(datetime.now().isoformat(), operation, status, summary[:500], details)
        with self.log_path.open("a", encoding="utf-8") as f:
            f.write(
                f"{entry.timestamp}|{_field(entry.operation)}|{entry.status}|"
                f"{_field(entry.summary)}|{_field(entry.details or '')}\n"
            )
        return entry

    def success(self, operation: str, summary: str, details: Optional[str] = None) -> AuditEntry:
        return self.record(operation, "SUCCESS", summary, details)

    def failure(self, operation: str, summary: str, details: Optional[str] = None) -> AuditEntry:
        return self.record(operation, "FAILED", summary, details)

    def entries(self, last_n: int = 10) -> List[Dict[str, Optional[str]]]:
        if not self.log_path.exists():
            return []
        out = []
        lines = self.log_path.read_text(encoding="utf-8").strip().split("\n")
        for line in lines[-last_n:] if last_n > 0 else lines:
            parts = line.split("|", 4)
            if len(parts) >= 4:
                out.append(
                    {
                        "timestamp": parts[0],
                        "operation": parts[1],
                        "status": parts[2],
                        "summary": parts[3],
                        "details": parts[4] or None if len(parts) > 4 else None,
                    }
                )
        return out

    def summary(self, last_n: int = 100) -> Dict[str, object]:
        entries = self.entries(last_n)
        by_op: Dict[str, int] = {}
        for e in entries:
            by_op[e["operation"]] = by_op.get(e["operation"], 0) + 1
        return {
            "log": str(self.log_path),
            "total": len(entries),
            "failed": sum(1 for e in entries if e["status"] != "SUCCESS"),
            "by_operation": by_op,
            "recent": entries[-5:],
        }
