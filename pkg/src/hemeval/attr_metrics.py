"""Feature-level accuracy, confusion matrices, and plausible-error rates.

Extraction output is joined with ground-truth records on image_id. For
each feature the denominator is the set of joined samples whose truth
defines the feature; an unmentioned feature counts as incorrect for
`accuracy`, with `mention_rate` and `accuracy_when_mentioned` reported
alongside so either convention can be read off. Conflicted extractions
score as incorrect unless the tie-broken value equals truth and are
tracked separately as `conflict_rate`.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

from .core import AttributeRecord, AttributeSchema, ExtractionResult, HemevalError

UNMENTIONED = "unmentioned"


class JoinError(HemevalError):
    pass


class PlausibilityError(HemevalError):
    pass


@dataclass(frozen=True)
class PlausibilityMap:
    """Per attribute, unordered value pairs considered plausible confusions."""

    pairs: Mapping[str, frozenset[frozenset[str]]]

    def plausible(self, feature: str, truth: str, predicted: str) -> bool:
        if truth == predicted or predicted == UNMENTIONED:
            return False
        return frozenset((truth, predicted)) in self.pairs.get(feature, frozenset())

    @classmethod
    def from_dict(cls, data: Mapping, schema: AttributeSchema) -> "PlausibilityMap":
        pairs: dict[str, frozenset[frozenset[str]]] = {}
        for feature, raw_pairs in data.items():
            attr = schema.attribute(feature)
            collected = set()
            for pair in raw_pairs:
                if len(pair) != 2 or pair[0] == pair[1]:
                    raise PlausibilityError(
                        f"{feature}: plausible pair must hold two distinct values, got {pair!r}"
                    )
                for value in pair:
                    if value not in attr.allowed_values:
                        raise PlausibilityError(f"{feature}: unknown value {value!r}")
                collected.add(frozenset(pair))
            pairs[feature] = frozenset(collected)
        return cls(pairs=pairs)


def load_plausibility(path: str | Path, schema: AttributeSchema) -> PlausibilityMap:
    with open(path, "r", encoding="utf-8") as fh:
        return PlausibilityMap.from_dict(json.load(fh), schema)


@dataclass(frozen=True)
class FeatureStats:
    feature: str
    n: int
    correct: int
    mentioned: int
    conflicted: int
    accuracy_pct: float
    mention_rate_pct: float
    accuracy_when_mentioned_pct: float | None
    conflict_rate_pct: float

    def to_dict(self) -> dict:
        return {
            "feature": self.feature,
            "n": self.n,
            "correct": self.correct,
            "mentioned": self.mentioned,
            "conflicted": self.conflicted,
            "accuracy_pct": self.accuracy_pct,
            "mention_rate_pct": self.mention_rate_pct,
            "accuracy_when_mentioned_pct": self.accuracy_when_mentioned_pct,
            "conflict_rate_pct": self.conflict_rate_pct,
        }


@dataclass(frozen=True)
class ConfusionMatrix:
    """Rows are truth values; columns are extracted values + `unmentioned`."""

    feature: str
    row_labels: tuple[str, ...]
    col_labels: tuple[str, ...]
    counts: tuple[tuple[int, ...], ...]

    def total(self) -> int:
        return sum(sum(row) for row in self.counts)

    def cell(self, truth: str, predicted: str) -> int:
        return self.counts[self.row_labels.index(truth)][self.col_labels.index(predicted)]

    def to_dict(self) -> dict:
        return {
            "feature": self.feature,
            "rows": list(self.row_labels),
            "columns": list(self.col_labels),
            "counts": [list(row) for row in self.counts],
        }


@dataclass(frozen=True)
class PlausibleErrorStats:
    feature: str
    rate: float
    plausible_errors: int
    total_errors: int
    no_errors: bool

    def to_dict(self) -> dict:
        return {
            "feature": self.feature,
            "rate": self.rate,
            "plausible_errors": self.plausible_errors,
            "total_errors": self.total_errors,
            "no_errors": self.no_errors,
        }


def join_on_image_id(
    extracted: Sequence[ExtractionResult], truth: Sequence[AttributeRecord]
) -> tuple[list[tuple[ExtractionResult, AttributeRecord]], list[str]]:
    """Pair extraction results with truth records.

    An extracted id missing from truth is fatal; truth ids that were never
    captioned are returned as the unmatched list.
    """
    seen: set[str] = set()
    for result in extracted:
        if result.image_id in seen:
            raise JoinError(f"duplicate image_id in extraction input: {result.image_id!r}")
        seen.add(result.image_id)
    by_id = {record.image_id: record for record in truth}
    if len(by_id) != len(truth):
        raise JoinError("duplicate image_id in truth records")
    orphans = sorted(r.image_id for r in extracted if r.image_id not in by_id)
    if orphans:
        raise JoinError(f"extracted ids missing from truth: {', '.join(orphans)}")
    joined = [(result, by_id[result.image_id]) for result in extracted]
    unmatched = sorted(set(by_id) - {r.image_id for r in extracted})
    return joined, unmatched


def feature_accuracy(
    extracted: Sequence[ExtractionResult],
    truth: Sequence[AttributeRecord],
    schema: AttributeSchema,
) -> dict[str, FeatureStats]:
    """Per-feature accuracy and mention-rate table over joined samples."""
    joined, _ = join_on_image_id(extracted, truth)
    stats: dict[str, FeatureStats] = {}
    for attr in schema.attributes:
        n = correct = mentioned = conflicted = 0
        for result, record in joined:
            expected = record.values.get(attr.name)
            if expected is None:
                continue
            n += 1
            got = result.value_of(attr.name)
            if got is not None:
                mentioned += 1
                if got == expected:
                    correct += 1
            if attr.name in result.conflicted_attributes():
                conflicted += 1
        if n == 0:
            continue
        stats[attr.name] = FeatureStats(
            feature=attr.name,
            n=n,
            correct=correct,
            mentioned=mentioned,
            conflicted=conflicted,
            accuracy_pct=100.0 * correct / n,
            mention_rate_pct=100.0 * mentioned / n,
            accuracy_when_mentioned_pct=(100.0 * correct / mentioned) if mentioned else None,
            conflict_rate_pct=100.0 * conflicted / n,
        )
    return stats


def confusion_matrix(
    feature: str,
    extracted: Sequence[ExtractionResult],
    truth: Sequence[AttributeRecord],
    schema: AttributeSchema,
) -> ConfusionMatrix:
    """Truth-by-extracted counts for one feature, with an `unmentioned` column."""
    attr = schema.attribute(feature)
    joined, _ = join_on_image_id(extracted, truth)
    rows = attr.allowed_values
    cols = attr.allowed_values + (UNMENTIONED,)
    counts = [[0] * len(cols) for _ in rows]
    for result, record in joined:
        expected = record.values.get(feature)
        if expected is None:
            continue
        got = result.value_of(feature)
        col = cols.index(got) if got is not None else cols.index(UNMENTIONED)
        counts[rows.index(expected)][col] += 1
    return ConfusionMatrix(
        feature=feature,
        row_labels=rows,
        col_labels=cols,
        counts=tuple(tuple(row) for row in counts),
    )


def plausible_error_rate(
    matrix: ConfusionMatrix, plausibility: PlausibilityMap, feature: str
) -> PlausibleErrorStats:
    """Fraction of errors that are plausible confusions per the map.

    Unmentioned cells count as errors but are never plausible. With no
    errors at all the rate is 0 and `no_errors` is set.
    """
    plausible = 0
    total = 0
    for i, truth_value in enumerate(matrix.row_labels):
        for j, predicted in enumerate(matrix.col_labels):
            count = matrix.counts[i][j]
            if count == 0 or predicted == truth_value:
                continue
            total += count
            if plausibility.plausible(feature, truth_value, predicted):
                plausible += count
    if total == 0:
        return PlausibleErrorStats(feature, 0.0, 0, 0, no_errors=True)
    return PlausibleErrorStats(feature, plausible / total, plausible, total, no_errors=False)


@dataclass(frozen=True)
class AttrMetricsReport:
    features: Mapping[str, FeatureStats]
    matrices: Mapping[str, ConfusionMatrix]
    plausible: Mapping[str, PlausibleErrorStats]
    unmatched_truth_ids: tuple[str, ...]

    def to_dict(self) -> dict:
        # `features` is a list so schema order survives key-sorted JSON.
        return {
            "features": [s.to_dict() for s in self.features.values()],
            "confusion_matrices": {name: m.to_dict() for name, m in self.matrices.items()},
            "plausible_errors": {name: p.to_dict() for name, p in self.plausible.items()},
            "unmatched_truth_ids": list(self.unmatched_truth_ids),
        }


def attribute_report(
    extracted: Sequence[ExtractionResult],
    truth: Sequence[AttributeRecord],
    schema: AttributeSchema,
    plausibility: PlausibilityMap | None = None,
) -> AttrMetricsReport:
    """Full per-feature report: stats, matrices, plausible-error rates."""
    joined, unmatched = join_on_image_id(extracted, truth)
    del joined
    stats = feature_accuracy(extracted, truth, schema)
    matrices = {}
    plausible = {}
    pmap = plausibility or PlausibilityMap(pairs={})
    for feature in stats:
        matrices[feature] = confusion_matrix(feature, extracted, truth, schema)
        plausible[feature] = plausible_error_rate(matrices[feature], pmap, feature)
    return AttrMetricsReport(
        features=stats,
        matrices=matrices,
        plausible=plausible,
        unmatched_truth_ids=tuple(unmatched),
    )
