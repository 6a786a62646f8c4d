"""Training-data loading against the pipeline's JSONL sample schema.

Only the fields the trainer consumes are enforced: ``code`` and a
``good``/``bad`` ``label``. Schema violations fail before any training step.
"""

from __future__ import annotations

import json
from pathlib import Path

LABEL_TO_CLASS = {"good": 0, "bad": 1}


class DataError(Exception):
    pass


def load_dataset(path: Path) -> tuple[list[str], list[int]]:
    codes: list[str] = []
    classes: list[int] = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            raw = raw.strip()
            if not raw:
                continue
            try:
                obj = json.loads(raw)
            except json.JSONDecodeError as e:
                raise DataError(f"{path}:{lineno}: invalid JSON ({e.msg})") from e
            if not isinstance(obj, dict) or "code" not in obj:
                raise DataError(f"{path}:{lineno}: record requires 'code'")
            label = obj.get("label")
            if label not in LABEL_TO_CLASS:
                raise DataError(f"{path}:{lineno}: label must be good or bad, "
                                f"got {label!r}")
            codes.append(str(obj["code"]))
            classes.append(LABEL_TO_CLASS[label])
    if not codes:
        raise DataError(f"{path}: no training samples")
    return codes, classes
