"""Controlled pattern matching: recover attribute values from free text.

The extractor matches lexicon patterns against normalized captions on
whole-token boundaries; a pattern can never fire inside a longer word.
Conflicting values for one attribute are surfaced, never silently
resolved: the reported value is the earliest (then longest) match and
every distinct matched value lands in the conflict list.

Known limitation: there is no negation handling. "no visible nucleoli"
matches "visible nucleoli" patterns, so lexicons must encode negated
findings as patterns of the negative value.
"""

from __future__ import annotations

from dataclasses import dataclass

from .core import (
    AttributeMatch,
    AttributeSchema,
    ExtractionResult,
    Lexicon,
    WILDCARD,
    check_lexicon,
    pattern_tokens,
)
from .textnorm import normalize, normalize_with_offsets, tokenize, tokenize_with_spans

__all__ = [
    "CompiledLexicon",
    "PatternHit",
    "compile_lexicon",
    "extract_attributes",
    "normalize",
    "normalize_with_offsets",
    "tokenize",
]


@dataclass(frozen=True)
class _CompiledPattern:
    attribute: str
    value: str
    tokens: tuple[str, ...]
    source: str


@dataclass(frozen=True)
class PatternHit:
    """One pattern occurrence, in normalized token coordinates."""

    attribute: str
    value: str
    token_start: int
    token_end: int
    pattern: str


class CompiledLexicon:
    """Token-indexed matcher over every pattern of every value.

    Patterns are bucketed by first literal token; wildcard-initial
    patterns are tried at every position. At a given start position a
    longer pattern shadows a shorter one of the same value.
    """

    def __init__(self, schema: AttributeSchema, patterns: list[_CompiledPattern]) -> None:
        self.schema = schema
        self._by_first: dict[str, list[_CompiledPattern]] = {}
        self._anywhere: list[_CompiledPattern] = []
        for pat in patterns:
            if pat.tokens[0] == WILDCARD:
                self._anywhere.append(pat)
            else:
                self._by_first.setdefault(pat.tokens[0], []).append(pat)

    def hits(self, tokens: list[str]) -> list[PatternHit]:
        """All pattern occurrences over a normalized token sequence."""
        found: list[PatternHit] = []
        empty: list[_CompiledPattern] = []
        for start, token in enumerate(tokens):
            for pat in self._by_first.get(token, empty) + self._anywhere:
                end = start + len(pat.tokens)
                if end > len(tokens):
                    continue
                if all(
                    p == WILDCARD or p == t
                    for p, t in zip(pat.tokens, tokens[start:end])
                ):
                    found.append(
                        PatternHit(pat.attribute, pat.value, start, end, pat.source)
                    )
        return found


def compile_lexicon(lexicon: Lexicon, schema: AttributeSchema) -> CompiledLexicon:
    """Validate a lexicon against the schema and compile its matcher."""
    check_lexicon(lexicon, schema)
    compiled: list[_CompiledPattern] = []
    for attr in schema.attributes:
        for value in attr.allowed_values:
            for pattern in lexicon.patterns(attr.name, value):
                compiled.append(
                    _CompiledPattern(
                        attribute=attr.name,
                        value=value,
                        tokens=tuple(pattern_tokens(pattern)),
                        source=pattern,
                    )
                )
    return CompiledLexicon(schema, compiled)


def _span_to_original(
    hit: PatternHit, token_spans: list[tuple[str, int, int]], offsets: list[int]
) -> tuple[int, int]:
    norm_start = token_spans[hit.token_start][1]
    norm_end = token_spans[hit.token_end - 1][2]
    return offsets[norm_start], offsets[norm_end - 1] + 1


def extract_attributes(
    caption: str, compiled: CompiledLexicon, schema: AttributeSchema
) -> ExtractionResult:
    """Extract attribute values from one caption.

    Per attribute: the earliest match wins, longest pattern breaking ties
    at the same position; if patterns of several distinct values match,
    the attribute is additionally recorded as a conflict. Spans refer to
    the original caption text.
    """
    return extract_with_id("", caption, compiled, schema)


def extract_with_id(
    image_id: str, caption: str, compiled: CompiledLexicon, schema: AttributeSchema
) -> ExtractionResult:
    normalized, offsets = normalize_with_offsets(caption)
    token_spans = tokenize_with_spans(normalized)
    tokens = [t for t, _, _ in token_spans]
    hits = compiled.hits(tokens)

    per_attribute: dict[str, list[PatternHit]] = {}
    for hit in hits:
        per_attribute.setdefault(hit.attribute, []).append(hit)

    values: dict[str, AttributeMatch] = {}
    conflicts: list[tuple[str, tuple[str, ...]]] = []
    for attr in schema.attributes:
        attr_hits = per_attribute.get(attr.name)
        if not attr_hits:
            continue
        best = min(attr_hits, key=lambda h: (h.token_start, -(h.token_end - h.token_start)))
        span = _span_to_original(best, token_spans, offsets)
        values[attr.name] = AttributeMatch(value=best.value, span=span, pattern=best.pattern)
        distinct = sorted({h.value for h in attr_hits})
        if len(distinct) > 1:
            conflicts.append((attr.name, tuple(distinct)))

    return ExtractionResult(image_id=image_id, values=values, conflicts=tuple(conflicts))
