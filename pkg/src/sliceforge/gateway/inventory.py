"""File-backed slice inventory: plain JSON documents, atomic writes
(temp file + rename), and an explicit schema version."""

from __future__ import annotations

import json
import os
import tempfile
from dataclasses import dataclass, field
from pathlib import Path

from ..errors import CorruptInventory, SchemaVersionMismatch

SCHEMA_VERSION = 1


@dataclass
class InventoryStore:
    nsis: dict = field(default_factory=dict)
    sessions: dict = field(default_factory=dict)
    transcripts: dict = field(default_factory=dict)
    schema_version: int = SCHEMA_VERSION

    def to_doc(self) -> dict:
        return {"schema_version": self.schema_version, "nsis": self.nsis,
                "sessions": self.sessions, "transcripts": self.transcripts}

    @classmethod
    def from_doc(cls, doc: dict) -> "InventoryStore":
        version = doc.get("schema_version")
        if version != SCHEMA_VERSION:
            raise SchemaVersionMismatch(
                f"inventory schema {version!r} != supported {SCHEMA_VERSION}; "
                f"migrate the file or move it aside and restart")
        return cls(nsis=dict(doc.get("nsis", {})),
                   sessions=dict(doc.get("sessions", {})),
                   transcripts=dict(doc.get("transcripts", {})),
                   schema_version=version)


def save_store(store: InventoryStore, path: str | Path) -> None:
    """Atomic write: a crash mid-save leaves the previous file intact."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=".inventory-", suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            json.dump(store.to_doc(), fh, sort_keys=True, indent=1)
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, path)
    finally:
        if os.path.exists(tmp):
            os.unlink(tmp)


def load_store(path: str | Path) -> InventoryStore:
    path = Path(path)
    if not path.exists():
        return InventoryStore()
    try:
        doc = json.loads(path.read_text())
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise CorruptInventory(
            f"{path} is not readable JSON ({exc}); restore from a backup or "
            f"delete the file to start with an empty inventory") from exc
    if not isinstance(doc, dict):
        raise CorruptInventory(f"{path}: inventory root must be an object")
    return InventoryStore.from_doc(doc)
