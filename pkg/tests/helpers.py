"""Shared test utilities: deterministic synthetic records and small schemas."""

from __future__ import annotations

from hemeval.core import AttributeRecord, AttributeSchema, applicable_to


def synthetic_records(n: int, schema: AttributeSchema, start: int = 0) -> list[AttributeRecord]:
    """Deterministic records that sweep every allowed value of every attribute.

    Record i alternates source; within a source, attribute values cycle
    with per-attribute phase offsets so combinations vary. With n large
    enough (two full cycles of the largest vocabulary) every value that
    is applicable to some source appears.
    """
    records = []
    counters = {"healthy": 0, "leukemic": 0}
    for i in range(start, start + n):
        source = "healthy" if i % 2 == 0 else "leukemic"
        k = counters[source]
        counters[source] += 1
        values = {}
        for j, attr in enumerate(schema.attributes):
            if not applicable_to(attr.applicability, source):
                continue
            pool = attr.values_for(source)
            values[attr.name] = pool[(k + j) % len(pool)]
        records.append(AttributeRecord(image_id=f"syn{i:04d}", source=source, values=values))
    return records


def tiny_schema() -> AttributeSchema:
    """Two-attribute schema for focused lexicon/extraction tests."""
    return AttributeSchema.from_dict(
        {
            "attributes": [
                {"name": "cell_size", "allowed_values": ["small", "medium", "large"]},
                {
                    "name": "nuclear_chromatin_texture",
                    "allowed_values": ["coarse", "open"],
                },
            ]
        }
    )
