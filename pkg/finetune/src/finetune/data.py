"""Readers for the two plain-file inputs: triplets and leveled events.

Both are JSONL. Validation is strict and happens up front so a bad
record fails fast with its line number instead of partway through a
training run or an export.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path


class DataFormatError(ValueError):
    pass


@dataclass(frozen=True)
class Triplet:
    anchor: str
    positive: str
    negative: str


def _read_records(path: Path):
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DataFormatError(f"{path}:{line_no}: bad JSON: {exc}") from None
            if not isinstance(record, dict):
                raise DataFormatError(f"{path}:{line_no}: expected an object")
            yield line_no, record


def load_triplets(path) -> list[Triplet]:
    path = Path(path)
    triplets = []
    for line_no, record in _read_records(path):
        fields = {}
        for key in ("anchor", "positive", "negative"):
            value = record.get(key)
            if not isinstance(value, str) or not value:
                raise DataFormatError(
                    f"{path}:{line_no}: bad triplet record: "
                    f"{key!r} must be a non-empty string"
                )
            fields[key] = value
        triplets.append(Triplet(**fields))
    return triplets


def load_events(path) -> list[dict]:
    """Read leveled events for export: id, content, heat_index, level.

    Extra fields on a record are ignored; the ones above are required
    and type-checked.
    """
    path = Path(path)
    events = []
    for line_no, record in _read_records(path):
        event_id = record.get("id")
        if not isinstance(event_id, str) or not event_id:
            raise DataFormatError(f"{path}:{line_no}: 'id' must be a non-empty string")
        content = record.get("content")
        if not isinstance(content, str):
            raise DataFormatError(f"{path}:{line_no}: 'content' must be a string")
        heat = record.get("heat_index")
        if isinstance(heat, bool) or not isinstance(heat, (int, float)):
            raise DataFormatError(f"{path}:{line_no}: 'heat_index' must be a number")
        if not math.isfinite(heat):
            raise DataFormatError(f"{path}:{line_no}: 'heat_index' must be finite")
        level = record.get("level")
        if isinstance(level, bool) or not isinstance(level, int) or level < 1:
            raise DataFormatError(
                f"{path}:{line_no}: 'level' must be a positive integer"
            )
        events.append(
            {
                "id": event_id,
                "content": content,
                "heat_index": float(heat),
                "level": level,
            }
        )
    return events
