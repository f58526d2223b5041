"""Template-driven caption synthesis with seeded surface variation.

Captions are rendered so that every attribute present in a record
surfaces as exactly one lexicon phrase: slots are filled with canonical
phrases, and any present attribute the template does not slot is appended
in a fixed trailing sentence. Variation (template pick, connective picks)
is a pure function of (seed, image_id, variant index) via the documented
mix in :mod:`hemeval.rng`, so corpora are byte-identical across runs.

Template syntax: ``{name}`` is a slot, resolved against the schema first
and the connective table second. ``[ ... ]`` wraps an optional group
holding exactly one attribute slot; the whole group is dropped when that
attribute is absent from the record. An attribute slot outside any group
is required.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

from .core import AttributeRecord, AttributeSchema, HemevalError, Lexicon
from .extract import CompiledLexicon, compile_lexicon, extract_attributes
from .rng import SeedStream, mix_seed

LABEL_ATTRIBUTES = ("cell_type", "diagnosis")
_VOWELS = "aeiouAEIOU"


class TemplateError(HemevalError):
    pass


class RenderError(HemevalError):
    pass


@dataclass(frozen=True)
class _Literal:
    text: str


@dataclass(frozen=True)
class _AttrSlot:
    name: str


@dataclass(frozen=True)
class _ConnSlot:
    name: str


@dataclass(frozen=True)
class _Group:
    items: tuple


_Item = _Literal | _AttrSlot | _ConnSlot | _Group


def _parse_items(text: str, schema: AttributeSchema, connectives: Mapping[str, tuple[str, ...]]):
    items: list[_Item] = []
    buf: list[str] = []
    i = 0
    while i < len(text):
        ch = text[i]
        if ch == "{":
            close = text.find("}", i)
            if close < 0:
                raise TemplateError(f"unclosed slot brace in template: {text!r}")
            if buf:
                items.append(_Literal("".join(buf)))
                buf = []
            name = text[i + 1 : close].strip()
            if schema.has_attribute(name):
                items.append(_AttrSlot(name))
            elif name in connectives:
                items.append(_ConnSlot(name))
            else:
                raise TemplateError(f"unknown slot {{{name}}} in template: {text!r}")
            i = close + 1
        elif ch == "[":
            close = text.find("]", i)
            if close < 0:
                raise TemplateError(f"unclosed optional group in template: {text!r}")
            inner = text[i + 1 : close]
            if "[" in inner:
                raise TemplateError(f"nested optional groups are not supported: {text!r}")
            if buf:
                items.append(_Literal("".join(buf)))
                buf = []
            group_items = _parse_items(inner, schema, connectives)
            attr_slots = [it for it in group_items if isinstance(it, _AttrSlot)]
            if len(attr_slots) != 1:
                raise TemplateError(
                    f"optional group must contain exactly one attribute slot: [{inner}]"
                )
            items.append(_Group(tuple(group_items)))
            i = close + 1
        elif ch == "}" or ch == "]":
            raise TemplateError(f"unbalanced {ch!r} in template: {text!r}")
        else:
            buf.append(ch)
            i += 1
    if buf:
        items.append(_Literal("".join(buf)))
    return items


def _slot_attributes(items: Sequence[_Item]) -> set[str]:
    names: set[str] = set()
    for item in items:
        if isinstance(item, _AttrSlot):
            names.add(item.name)
        elif isinstance(item, _Group):
            names.update(_slot_attributes(item.items))
    return names


@dataclass(frozen=True)
class Template:
    raw: str
    items: tuple


@dataclass(frozen=True)
class TemplateSet:
    """Parsed caption skeletons plus connective variant table."""

    templates: tuple[Template, ...]
    connectives: Mapping[str, tuple[str, ...]]

    @classmethod
    def from_dict(cls, data: Mapping, schema: AttributeSchema) -> "TemplateSet":
        raw_templates = data.get("templates")
        if not raw_templates:
            raise TemplateError("template file must contain a non-empty 'templates' list")
        connectives: dict[str, tuple[str, ...]] = {}
        for name, variants in dict(data.get("connectives", {})).items():
            if not variants or any(not v for v in variants):
                raise TemplateError(f"connective {name!r} needs non-empty variants")
            if schema.has_attribute(name):
                raise TemplateError(f"connective {name!r} shadows a schema attribute")
            connectives[name] = tuple(variants)

        label_names = [n for n in LABEL_ATTRIBUTES if schema.has_attribute(n)]
        parsed = []
        for raw in raw_templates:
            items = tuple(_parse_items(raw, schema, connectives))
            covered = _slot_attributes(items)
            if label_names and not covered.intersection(label_names):
                raise TemplateError(
                    f"template must cover one of {label_names}: {raw!r}"
                )
            if not covered.difference(LABEL_ATTRIBUTES):
                raise TemplateError(f"template needs at least one morphology slot: {raw!r}")
            parsed.append(Template(raw=raw, items=items))
        return cls(templates=tuple(parsed), connectives=connectives)


def load_templates(path: str | Path, schema: AttributeSchema) -> TemplateSet:
    with open(path, "r", encoding="utf-8") as fh:
        return TemplateSet.from_dict(json.load(fh), schema)


def _fix_article(parts: list[str], phrase: str) -> None:
    """Adjust a trailing 'a'/'an' in the emitted text to match *phrase*."""
    if not parts:
        return
    tail = parts[-1]
    stripped = tail.rstrip()
    trailing_ws = tail[len(stripped):]
    for article in ("a", "an", "A", "An"):
        if stripped == article or stripped.endswith((" " + article, "(" + article)):
            want_an = phrase[:1] in _VOWELS
            fixed = (article[0] + "n") if want_an else article[0]
            if article[0].isupper():
                fixed = fixed.capitalize()
            if fixed != article:
                parts[-1] = stripped[: len(stripped) - len(article)] + fixed + trailing_ws
            return


def _emit(
    items: Sequence[_Item],
    record: AttributeRecord,
    lexicon: Lexicon,
    stream: SeedStream,
    connectives: Mapping[str, tuple[str, ...]],
    parts: list[str],
) -> None:
    for item in items:
        if isinstance(item, _Literal):
            parts.append(item.text)
        elif isinstance(item, _ConnSlot):
            variants = connectives[item.name]
            parts.append(variants[stream.choice_index(len(variants))])
        elif isinstance(item, _AttrSlot):
            value = record.values.get(item.name)
            if value is None:
                raise RenderError(f"record is missing a value for slot {{{item.name}}}")
            phrase = lexicon.canonical(item.name, value)
            _fix_article(parts, phrase)
            parts.append(phrase)
        else:
            slot = next(it for it in item.items if isinstance(it, _AttrSlot))
            if record.values.get(slot.name) is None:
                continue
            _emit(item.items, record, lexicon, stream, connectives, parts)


def _join_phrases(phrases: list[str]) -> str:
    if len(phrases) == 1:
        return phrases[0]
    if len(phrases) == 2:
        return f"{phrases[0]} and {phrases[1]}"
    return ", ".join(phrases[:-1]) + f", and {phrases[-1]}"


def render_variant(
    record: AttributeRecord,
    templates: TemplateSet,
    lexicon: Lexicon,
    schema: AttributeSchema,
    seed: int,
    variant: int,
) -> str:
    """Render one caption variant; variant 0 is render_caption's output.

    Draw order from the mixed stream: template index first, then each
    connective slot of realized segments in template order.
    """
    stream = SeedStream(mix_seed(seed, record.image_id, variant))
    template = templates.templates[stream.choice_index(len(templates.templates))]

    parts: list[str] = []
    try:
        _emit(template.items, record, lexicon, stream, templates.connectives, parts)
    except RenderError as exc:
        raise RenderError(f"record {record.image_id!r}: {exc}") from None

    covered = _slot_attributes(template.items)
    extras = [
        lexicon.canonical(name, record.values[name])
        for name in schema.names()
        if name in record.values and name not in covered
    ]
    if extras:
        parts.append(" The cell also shows " + _join_phrases(extras) + ".")

    return " ".join("".join(parts).split())


def render_caption(
    record: AttributeRecord,
    templates: TemplateSet,
    lexicon: Lexicon,
    schema: AttributeSchema,
    seed: int,
) -> str:
    """Render the caption for a record; deterministic in (seed, image_id)."""
    if seed < 0:
        raise RenderError("seed must be >= 0")
    return render_variant(record, templates, lexicon, schema, seed, 0)


def synth_corpus(
    records: Sequence[AttributeRecord],
    templates: TemplateSet,
    lexicon: Lexicon,
    schema: AttributeSchema,
    variants_per_record: int = 1,
    seed: int = 0,
) -> list[tuple[str, int, str]]:
    """Render every record `variants_per_record` times.

    Output order is records × variants, record-major. Variant k of a
    record draws from mix_seed(seed, image_id, k), so single variants can
    be re-rendered independently.
    """
    if variants_per_record < 1:
        raise RenderError("variants_per_record must be >= 1")
    out: list[tuple[str, int, str]] = []
    for record in records:
        for k in range(variants_per_record):
            out.append(
                (record.image_id, k, render_variant(record, templates, lexicon, schema, seed, k))
            )
    return out


@dataclass(frozen=True)
class FaithfulnessResult:
    passed: bool
    missing: tuple[str, ...]
    contradicted: tuple[str, ...]


def verify_faithfulness(
    caption: str,
    record: AttributeRecord,
    lexicon: Lexicon,
    schema: AttributeSchema,
    compiled: CompiledLexicon | None = None,
) -> FaithfulnessResult:
    """Check a caption against a record via the extractor.

    Passes iff every attribute present in the record is recovered with
    the correct value and without competing values, and the caption does
    not assert values for attributes the record leaves undefined.
    """
    if compiled is None:
        compiled = compile_lexicon(lexicon, schema)
    result = extract_attributes(caption, compiled, schema)
    conflicted = result.conflicted_attributes()

    missing: list[str] = []
    contradicted: list[str] = []
    for name in schema.names():
        expected = record.values.get(name)
        got = result.value_of(name)
        if expected is not None:
            if got is None:
                missing.append(name)
            elif got != expected or name in conflicted:
                contradicted.append(name)
        elif got is not None:
            contradicted.append(name)
    return FaithfulnessResult(
        passed=not missing and not contradicted,
        missing=tuple(missing),
        contradicted=tuple(contradicted),
    )
