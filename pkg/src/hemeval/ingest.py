"""Loaders for attribute tables (CSV), caption pairs and embeddings (JSONL).

Attribute-table loading implements the corpus filtering step: rows with a
missing or out-of-vocabulary value for any applicable attribute are
rejected with the first violated constraint, and duplicate ids are
rejected so ids stay usable as join keys.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .core import AttributeRecord, AttributeSchema, CaptionPair, EmbeddingSet, HemevalError, record_violations
from .jsonlio import iter_jsonl, read_meta


class IngestError(HemevalError):
    pass


@dataclass(frozen=True)
class RejectedRow:
    row_number: int
    reason: str
    row: dict


def load_attribute_table(
    path: str | Path, schema: AttributeSchema
) -> tuple[list[AttributeRecord], list[RejectedRow]]:
    """Load and filter a CSV attribute table.

    Returns accepted records (input order preserved) and rejected rows,
    each annotated with the first violated constraint. A header missing
    `image_id`, `source`, or any schema attribute column is fatal.
    """
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise IngestError(f"{path}: empty file, expected a CSV header")
        header = list(reader.fieldnames)
        for column in ["image_id", "source", *schema.names()]:
            if column not in header:
                raise IngestError(f"{path}: missing required column {column!r}")
        rows = list(reader)

    records: list[AttributeRecord] = []
    rejects: list[RejectedRow] = []
    seen: set[str] = set()
    for number, row in enumerate(rows, start=1):
        image_id = (row.get("image_id") or "").strip()
        source = (row.get("source") or "").strip()
        if not image_id:
            rejects.append(RejectedRow(number, "missing image_id", row))
            continue
        if image_id in seen:
            rejects.append(RejectedRow(number, "duplicate id", row))
            continue
        if source not in ("healthy", "leukemic"):
            rejects.append(RejectedRow(number, f"invalid source: {source!r}", row))
            continue
        values = {}
        for name in schema.names():
            cell = (row.get(name) or "").strip()
            if cell:
                values[name] = cell
        record = AttributeRecord(image_id=image_id, source=source, values=values)
        problems = record_violations(record, schema)
        if problems:
            rejects.append(RejectedRow(number, problems[0], row))
            continue
        seen.add(image_id)
        records.append(record)
    return records, rejects


def load_caption_pairs(path: str | Path) -> list[CaptionPair]:
    """Load a pairs JSONL file (`image_id`, `reference`, `candidate`)."""
    pairs: list[CaptionPair] = []
    for line_no, obj in iter_jsonl(path):
        for field in ("image_id", "reference", "candidate"):
            if field not in obj:
                raise IngestError(f"line {line_no}: missing field {field}")
        try:
            pairs.append(
                CaptionPair(
                    image_id=str(obj["image_id"]),
                    reference=str(obj["reference"]),
                    candidate=str(obj["candidate"]),
                )
            )
        except HemevalError as exc:
            raise IngestError(f"line {line_no}: {exc}") from None
    return pairs


def load_captions(path: str | Path) -> list[tuple[str, str]]:
    """Load a captions JSONL file (`image_id`, `text`) in input order."""
    out: list[tuple[str, str]] = []
    for line_no, obj in iter_jsonl(path):
        for field in ("image_id", "text"):
            if field not in obj:
                raise IngestError(f"line {line_no}: missing field {field}")
        out.append((str(obj["image_id"]), str(obj["text"])))
    return out


def load_embeddings(path: str | Path) -> EmbeddingSet:
    """Load an embeddings JSONL file (`id`, `vector`, optional `labels`).

    Enforces a uniform dimension and finite components; a `meta` header
    line declaring a dimension is checked against the data.
    """
    ids: list[str] = []
    vectors: list[list[float]] = []
    label_rows: list[dict] = []
    dimension: int | None = None
    for line_no, obj in iter_jsonl(path):
        if "id" not in obj or "vector" not in obj:
            raise IngestError(f"line {line_no}: missing field 'id' or 'vector'")
        vec_id = str(obj["id"])
        vector = obj["vector"]
        if not isinstance(vector, list) or not vector:
            raise IngestError(f"non-empty vector array required for id {vec_id!r}")
        values = []
        for component in vector:
            value = float(component)
            if not np.isfinite(value):
                raise IngestError(f"non-finite vector component for id {vec_id!r}")
            values.append(value)
        if dimension is None:
            dimension = len(values)
        elif len(values) != dimension:
            raise IngestError(
                f"dimension mismatch for id {vec_id!r}: got {len(values)}, expected {dimension}"
            )
        if vec_id in ids:
            raise IngestError(f"duplicate id {vec_id!r}")
        ids.append(vec_id)
        vectors.append(values)
        label_rows.append(dict(obj.get("labels", {})))

    if not ids:
        raise IngestError(f"{path}: no embeddings found")

    meta = read_meta(path)
    if meta and "dimension" in meta and int(meta["dimension"]) != dimension:
        raise IngestError(
            f"{path}: header declares dimension {meta['dimension']}, data has {dimension}"
        )

    label_names = sorted({name for row in label_rows for name in row})
    labels: dict[str, tuple[str, ...]] = {}
    for name in label_names:
        column = []
        for vec_id, row in zip(ids, label_rows):
            if name not in row:
                raise IngestError(f"id {vec_id!r} missing label {name!r}")
            column.append(str(row[name]))
        labels[name] = tuple(column)

    return EmbeddingSet(ids=tuple(ids), vectors=np.array(vectors, dtype=np.float64), labels=labels)
