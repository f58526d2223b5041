"""JSON-Lines reading/writing with the toolkit's header convention.

Files written by the toolkit start with a single header object whose only
key is "meta" (tool version, seed, options, input digests). Readers skip
such a header when present, so externally produced files without one load
unchanged.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Iterable, Iterator

from .core import HemevalError


class JsonlError(HemevalError):
    pass


def iter_jsonl(path: str | Path) -> Iterator[tuple[int, dict]]:
    """Yield (line_number, object) for every record line, skipping a header.

    Line numbers are 1-based file line numbers. Blank trailing lines are
    ignored; blank interior lines are errors.
    """
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().split("\n")
    while lines and lines[-1] == "":
        lines.pop()
    for idx, raw in enumerate(lines, start=1):
        if raw.strip() == "":
            raise JsonlError(f"line {idx}: blank line")
        try:
            obj = json.loads(raw)
        except json.JSONDecodeError as exc:
            raise JsonlError(f"line {idx}: invalid JSON ({exc.msg})") from None
        if not isinstance(obj, dict):
            raise JsonlError(f"line {idx}: expected a JSON object")
        if idx == 1 and set(obj.keys()) == {"meta"}:
            continue
        yield idx, obj


def read_meta(path: str | Path) -> dict | None:
    """Header meta block of a JSONL file, if present."""
    with open(path, "r", encoding="utf-8") as fh:
        first = fh.readline().strip()
    if not first:
        return None
    try:
        obj = json.loads(first)
    except json.JSONDecodeError:
        return None
    if isinstance(obj, dict) and set(obj.keys()) == {"meta"}:
        return obj["meta"]
    return None


def write_jsonl(path: str | Path, objects: Iterable[dict], meta: dict | None = None) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        if meta is not None:
            fh.write(json.dumps({"meta": meta}, sort_keys=True, ensure_ascii=False) + "\n")
        for obj in objects:
            fh.write(json.dumps(obj, sort_keys=True, ensure_ascii=False) + "\n")
