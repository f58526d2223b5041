"""Accessors for the packaged default schema, lexicon, templates and
plausibility map. All of them are plain JSON files that users can copy,
extend, and pass back in through the CLI flags."""

from __future__ import annotations

import json
from importlib import resources

from .core import AttributeSchema, Lexicon


def _load_json(name: str):
    with resources.files("hemeval.data").joinpath(name).open("r", encoding="utf-8") as fh:
        return json.load(fh)


def default_schema() -> AttributeSchema:
    return AttributeSchema.from_dict(_load_json("default_schema.json"))


def default_lexicon() -> Lexicon:
    return Lexicon.from_dict(_load_json("default_lexicon.json"))


def default_templates_dict() -> dict:
    return _load_json("default_templates.json")


def default_plausibility_dict() -> dict:
    return _load_json("default_plausibility.json")
