"""Shared data model: schemas, records, caption pairs, lexicons, embeddings.

Everything here is immutable after construction and safe to share across
threads. Schemas and lexicons are read from UTF-8 JSON files; see the
README for the file formats.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .textnorm import collapse_whitespace, tokenize

APPLICABILITIES = ("all", "healthy_only", "leukemic_only")
SOURCES = ("healthy", "leukemic")
WILDCARD = "*"

_IDENT_RE = re.compile(r"^[A-Za-z0-9_][A-Za-z0-9_-]*$")


class HemevalError(Exception):
    """Base class for all toolkit errors."""


class SchemaError(HemevalError):
    pass


class LexiconError(HemevalError):
    pass


def _check_identifier(value: str, what: str) -> None:
    if not _IDENT_RE.match(value):
        raise SchemaError(f"{what} {value!r} is not a valid identifier")


def applicable_to(applicability: str, source: str) -> bool:
    if applicability == "all":
        return True
    if applicability == "healthy_only":
        return source == "healthy"
    return source == "leukemic"


# ---------------------------------------------------------------------------
# Schema
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class AttributeDef:
    """One categorical attribute: its value vocabulary and applicability.

    ``value_applicability`` optionally restricts individual values to one
    source (e.g. blast cell types to leukemic cells) while the attribute
    itself stays applicable to both.
    """

    name: str
    allowed_values: tuple[str, ...]
    applicability: str = "all"
    value_applicability: Mapping[str, str] = field(default_factory=dict)

    def __post_init__(self) -> None:
        _check_identifier(self.name, "attribute name")
        if not self.allowed_values:
            raise SchemaError(f"attribute {self.name!r} has no allowed values")
        if len(set(self.allowed_values)) != len(self.allowed_values):
            raise SchemaError(f"attribute {self.name!r} has duplicate allowed values")
        for value in self.allowed_values:
            _check_identifier(value, f"value of {self.name!r}")
        if self.applicability not in APPLICABILITIES:
            raise SchemaError(
                f"attribute {self.name!r}: applicability must be one of {APPLICABILITIES}"
            )
        for value, app in self.value_applicability.items():
            if value not in self.allowed_values:
                raise SchemaError(
                    f"attribute {self.name!r}: value_applicability names unknown value {value!r}"
                )
            if app not in APPLICABILITIES:
                raise SchemaError(
                    f"attribute {self.name!r}: value applicability must be one of {APPLICABILITIES}"
                )

    def value_applicable_to(self, value: str, source: str) -> bool:
        return applicable_to(self.value_applicability.get(value, "all"), source)

    def values_for(self, source: str) -> tuple[str, ...]:
        return tuple(v for v in self.allowed_values if self.value_applicable_to(v, source))


@dataclass(frozen=True)
class AttributeSchema:
    """Ordered collection of attribute definitions with unique names."""

    attributes: tuple[AttributeDef, ...]

    def __post_init__(self) -> None:
        names = [a.name for a in self.attributes]
        if len(set(names)) != len(names):
            dupes = sorted({n for n in names if names.count(n) > 1})
            raise SchemaError(f"duplicate attribute names: {', '.join(dupes)}")

    def names(self) -> tuple[str, ...]:
        return tuple(a.name for a in self.attributes)

    def attribute(self, name: str) -> AttributeDef:
        for a in self.attributes:
            if a.name == name:
                return a
        raise SchemaError(f"unknown attribute {name!r}")

    def has_attribute(self, name: str) -> bool:
        return any(a.name == name for a in self.attributes)

    def applicable_names(self, source: str) -> tuple[str, ...]:
        return tuple(a.name for a in self.attributes if applicable_to(a.applicability, source))

    def to_dict(self) -> dict:
        return {
            "attributes": [
                {
                    "name": a.name,
                    "allowed_values": list(a.allowed_values),
                    "applicability": a.applicability,
                    **(
                        {"value_applicability": dict(a.value_applicability)}
                        if a.value_applicability
                        else {}
                    ),
                }
                for a in self.attributes
            ]
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> "AttributeSchema":
        if "attributes" not in data:
            raise SchemaError("schema file must contain an 'attributes' list")
        defs = []
        for entry in data["attributes"]:
            if "name" not in entry or "allowed_values" not in entry:
                raise SchemaError("every attribute needs 'name' and 'allowed_values'")
            defs.append(
                AttributeDef(
                    name=entry["name"],
                    allowed_values=tuple(entry["allowed_values"]),
                    applicability=entry.get("applicability", "all"),
                    value_applicability=dict(entry.get("value_applicability", {})),
                )
            )
        return cls(attributes=tuple(defs))


def load_schema(path: str | Path) -> AttributeSchema:
    with open(path, "r", encoding="utf-8") as fh:
        return AttributeSchema.from_dict(json.load(fh))


def dump_schema(schema: AttributeSchema, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(schema.to_dict(), fh, indent=2, ensure_ascii=False)
        fh.write("\n")


# ---------------------------------------------------------------------------
# Records and caption pairs
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class AttributeRecord:
    """One cell's attribute values. Missing keys mean 'not applicable'."""

    image_id: str
    source: str
    values: Mapping[str, str]

    def __post_init__(self) -> None:
        if not self.image_id:
            raise SchemaError("record has an empty image_id")
        if self.source not in SOURCES:
            raise SchemaError(
                f"record {self.image_id!r}: source must be one of {SOURCES}, got {self.source!r}"
            )


def record_violations(record: AttributeRecord, schema: AttributeSchema) -> list[str]:
    """All constraint violations of a record, in schema order; [] if valid."""
    problems: list[str] = []
    known = set(schema.names())
    for name in record.values:
        if name not in known:
            problems.append(f"unknown attribute {name}")
    for attr in schema.attributes:
        value = record.values.get(attr.name)
        if applicable_to(attr.applicability, record.source):
            if value is None or value == "":
                problems.append(f"missing value for {attr.name}")
            elif value not in attr.allowed_values:
                problems.append(f"invalid value for {attr.name}: {value!r}")
            elif not attr.value_applicable_to(value, record.source):
                problems.append(
                    f"value {value!r} of {attr.name} not applicable to {record.source} cells"
                )
        elif value not in (None, ""):
            problems.append(f"value for non-applicable attribute {attr.name}")
    return problems


def validate_record(record: AttributeRecord, schema: AttributeSchema) -> None:
    problems = record_violations(record, schema)
    if problems:
        raise SchemaError(f"record {record.image_id!r}: {problems[0]}")


@dataclass(frozen=True)
class CaptionPair:
    """Reference and candidate caption for one image, whitespace-normalized."""

    image_id: str
    reference: str
    candidate: str

    def __post_init__(self) -> None:
        object.__setattr__(self, "reference", collapse_whitespace(self.reference))
        object.__setattr__(self, "candidate", collapse_whitespace(self.candidate))
        if not self.image_id:
            raise SchemaError("caption pair has an empty image_id")
        if not self.reference:
            raise SchemaError(f"pair {self.image_id!r}: empty reference caption")
        if not self.candidate:
            raise SchemaError(f"pair {self.image_id!r}: empty candidate caption")


# ---------------------------------------------------------------------------
# Lexicon
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Lexicon:
    """attribute -> value -> surface patterns; patterns[0] is the canonical
    phrase used by caption synthesis. Patterns are literal token phrases,
    optionally containing '*' as a single-token wildcard."""

    entries: Mapping[str, Mapping[str, tuple[str, ...]]]

    def patterns(self, attribute: str, value: str) -> tuple[str, ...]:
        try:
            return self.entries[attribute][value]
        except KeyError:
            raise LexiconError(f"lexicon has no patterns for {attribute}={value}") from None

    def canonical(self, attribute: str, value: str) -> str:
        return self.patterns(attribute, value)[0]

    def to_dict(self) -> dict:
        return {
            attr: {
                value: {"patterns": list(pats), "canonical": pats[0]}
                for value, pats in values.items()
            }
            for attr, values in self.entries.items()
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> "Lexicon":
        entries: dict[str, dict[str, tuple[str, ...]]] = {}
        for attr, values in data.items():
            entries[attr] = {}
            for value, spec in values.items():
                if "patterns" not in spec or not spec["patterns"]:
                    raise LexiconError(f"{attr}={value}: 'patterns' must be a non-empty list")
                patterns = list(spec["patterns"])
                canonical = spec.get("canonical", patterns[0])
                if canonical not in patterns:
                    raise LexiconError(
                        f"{attr}={value}: canonical {canonical!r} is not among the patterns"
                    )
                patterns.remove(canonical)
                patterns.insert(0, canonical)
                entries[attr][value] = tuple(patterns)
        return cls(entries=entries)


def pattern_tokens(pattern: str) -> list[str]:
    """Tokenize a lexicon pattern, preserving single-token wildcards."""
    toks = []
    for raw in pattern.split():
        if raw == WILDCARD:
            toks.append(WILDCARD)
        else:
            toks.extend(tokenize(raw))
    return toks


def _contained(inner: list[str], outer: list[str]) -> bool:
    """Token-sublist containment; a wildcard on either side matches any token."""
    if len(inner) > len(outer):
        return False
    for off in range(len(outer) - len(inner) + 1):
        if all(
            a == WILDCARD or b == WILDCARD or a == b
            for a, b in zip(inner, outer[off : off + len(inner)])
        ):
            return True
    return False


def check_lexicon(lexicon: Lexicon, schema: AttributeSchema) -> None:
    """Raise LexiconError on the first validity violation.

    Besides coverage, enforces the ambiguity guard: within one attribute a
    pattern of one value must not be contained (as a whole-token sublist)
    in a pattern of a different value.
    """
    for attr in lexicon.entries:
        if not schema.has_attribute(attr):
            raise LexiconError(f"lexicon covers unknown attribute {attr!r}")
    for attr in schema.attributes:
        values = lexicon.entries.get(attr.name, {})
        for value in attr.allowed_values:
            if value not in values or not values[value]:
                raise LexiconError(f"no patterns for {attr.name}={value}")
        for value in values:
            if value not in attr.allowed_values:
                raise LexiconError(f"lexicon covers unknown value {attr.name}={value}")
            for pattern in values[value]:
                toks = pattern_tokens(pattern)
                if not toks:
                    raise LexiconError(f"{attr.name}={value}: empty pattern {pattern!r}")
                if all(t == WILDCARD for t in toks):
                    raise LexiconError(
                        f"{attr.name}={value}: pattern {pattern!r} has no literal token"
                    )
        for value_a in attr.allowed_values:
            for value_b in attr.allowed_values:
                if value_a == value_b:
                    continue
                for pat_a in values[value_a]:
                    for pat_b in values[value_b]:
                        if _contained(pattern_tokens(pat_a), pattern_tokens(pat_b)):
                            raise LexiconError(
                                f"ambiguous lexicon for {attr.name}: pattern {pat_a!r} of "
                                f"value {value_a!r} is contained in pattern {pat_b!r} of "
                                f"value {value_b!r}"
                            )


def load_lexicon(path: str | Path) -> Lexicon:
    with open(path, "r", encoding="utf-8") as fh:
        return Lexicon.from_dict(json.load(fh))


def dump_lexicon(lexicon: Lexicon, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(lexicon.to_dict(), fh, indent=2, ensure_ascii=False)
        fh.write("\n")


# ---------------------------------------------------------------------------
# Extraction results
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class AttributeMatch:
    """One extracted value with provenance: original-text span and pattern."""

    value: str
    span: tuple[int, int]
    pattern: str


@dataclass(frozen=True)
class ExtractionResult:
    """Attribute values recovered from one caption."""

    image_id: str
    values: Mapping[str, AttributeMatch]
    conflicts: tuple[tuple[str, tuple[str, ...]], ...] = ()

    def value_of(self, attribute: str) -> str | None:
        match = self.values.get(attribute)
        return match.value if match else None

    def conflicted_attributes(self) -> frozenset[str]:
        return frozenset(attr for attr, _ in self.conflicts)


# ---------------------------------------------------------------------------
# Embeddings and classifier reports
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class EmbeddingSet:
    """Frozen image embeddings with aligned label columns."""

    ids: tuple[str, ...]
    vectors: np.ndarray
    labels: Mapping[str, tuple[str, ...]]

    def __post_init__(self) -> None:
        vectors = np.asarray(self.vectors, dtype=np.float64)
        object.__setattr__(self, "vectors", vectors)
        if vectors.ndim != 2:
            raise SchemaError("embedding vectors must form a 2-D array")
        if len(self.ids) != vectors.shape[0]:
            raise SchemaError(
                f"{len(self.ids)} ids but {vectors.shape[0]} vectors"
            )
        if len(set(self.ids)) != len(self.ids):
            raise SchemaError("duplicate ids in embedding set")
        if not np.all(np.isfinite(vectors)):
            bad = int(np.argwhere(~np.isfinite(vectors).all(axis=1))[0][0])
            raise SchemaError(f"non-finite vector component for id {self.ids[bad]!r}")
        for name, classes in self.labels.items():
            if len(classes) != len(self.ids):
                raise SchemaError(
                    f"label {name!r} has {len(classes)} entries for {len(self.ids)} ids"
                )
        vectors.setflags(write=False)

    @property
    def dimension(self) -> int:
        return int(self.vectors.shape[1])

    def __len__(self) -> int:
        return len(self.ids)

    def subset(self, indices: Sequence[int]) -> "EmbeddingSet":
        idx = list(indices)
        return EmbeddingSet(
            ids=tuple(self.ids[i] for i in idx),
            vectors=self.vectors[idx].copy(),
            labels={name: tuple(vals[i] for i in idx) for name, vals in self.labels.items()},
        )


@dataclass(frozen=True)
class ClassScores:
    precision: float
    recall: float
    f1: float
    support: int


@dataclass(frozen=True)
class ClassifierReport:
    """Nearest-prototype evaluation summary for one label task."""

    task: str
    accuracy: float
    weighted_f1: float
    classes: tuple[str, ...]
    per_class: Mapping[str, ClassScores]
    confusion: tuple[tuple[int, ...], ...]
    head: str = "cosine_nearest_prototype"

    def to_dict(self) -> dict:
        return {
            "task": self.task,
            "head": self.head,
            "accuracy": self.accuracy,
            "weighted_f1": self.weighted_f1,
            "classes": list(self.classes),
            "per_class": {
                c: {
                    "precision": s.precision,
                    "recall": s.recall,
                    "f1": s.f1,
                    "support": s.support,
                }
                for c, s in self.per_class.items()
            },
            "confusion": [list(row) for row in self.confusion],
        }


def unique_preserving(items: Iterable[str]) -> list[str]:
    seen: set[str] = set()
    out: list[str] = []
    for item in items:
        if item not in seen:
            seen.add(item)
            out.append(item)
    return out
