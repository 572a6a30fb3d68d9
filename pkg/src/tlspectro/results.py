"""Results document: one JSON file per run, replayable from its seeds.

The document is serialized with sorted keys and fixed separators so a
re-run under the same master seed is byte-identical except for the
single `created_at` field. Every numeric result carries units in its
key name (suffix conventions: _hz, _v, _s, _db) and an uncertainty
where one is defined.
"""

import datetime
import json
import os
import tempfile
from pathlib import Path

from .errors import GridFormatError

__all__ = ["ResultsDoc", "write_results", "read_results", "strip_volatile"]

SCHEMA_VERSION = 1


class ResultsDoc(dict):
    """A plain dict with a fixed envelope; see module docstring."""

    @classmethod
    def new(cls, kind: str, seed: int, config: dict) -> "ResultsDoc":
        doc = cls()
        doc["schema_version"] = SCHEMA_VERSION
        doc["kind"] = kind
        doc["seed"] = seed
        doc["config"] = config
        doc["created_at"] = datetime.datetime.now(datetime.timezone.utc).isoformat()
        doc["rows"] = []
        return doc

    def canonical_json(self) -> str:
        return json.dumps(self, sort_keys=True, indent=2, separators=(",", ": ")) + "\n"


def write_results(doc: ResultsDoc, path) -> None:
    """Atomic write of the canonical JSON form."""
    path = Path(path)
    blob = doc.canonical_json().encode("utf-8")
    fd, tmp = tempfile.mkstemp(dir=path.parent or Path("."), prefix=path.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(blob)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def read_results(path) -> ResultsDoc:
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise GridFormatError(f"results file is not valid JSON: {exc}") from exc
    if not isinstance(data, dict) or "schema_version" not in data:
        raise GridFormatError("results file missing schema_version")
    doc = ResultsDoc()
    doc.update(data)
    return doc


def strip_volatile(doc: dict) -> dict:
    """Copy without timestamp fields, for byte-level comparisons."""
    out = {k: v for k, v in doc.items() if k != "created_at"}
    return out
