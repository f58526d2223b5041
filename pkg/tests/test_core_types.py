from __future__ import annotations

import json

import numpy as np
import pytest

from hemeval.core import (
    AttributeDef,
    AttributeRecord,
    AttributeSchema,
    CaptionPair,
    EmbeddingSet,
    Lexicon,
    LexiconError,
    SchemaError,
    check_lexicon,
    dump_schema,
    load_schema,
    record_violations,
)
from hemeval.defaults import default_lexicon, default_schema

REQUIRED_ATTRIBUTES = {
    "cell_type",
    "diagnosis",
    "cell_size",
    "nuclear_shape",
    "overall_shape",
    "nuclear_chromatin_texture",
    "cytoplasm_amount",
    "nucleoli_visibility",
    "basophilia",
}


def test_default_schema_covers_required_attributes(schema):
    assert REQUIRED_ATTRIBUTES.issubset(set(schema.names()))


def test_default_schema_value_vocabularies(schema):
    assert set(schema.attribute("diagnosis").allowed_values) == {
        "healthy",
        "ALL",
        "AML",
        "APML",
        "CLL",
        "CML",
    }
    healthy_types = set(schema.attribute("cell_type").values_for("healthy"))
    assert healthy_types == {"neutrophil", "eosinophil", "basophil", "lymphocyte", "monocyte"}


def test_schema_roundtrip_through_file(schema, tmp_path):
    path = tmp_path / "schema.json"
    dump_schema(schema, path)
    reloaded = load_schema(path)
    assert reloaded == schema


def test_schema_rejects_duplicate_attribute_names():
    with pytest.raises(SchemaError, match="duplicate attribute names"):
        AttributeSchema(
            attributes=(
                AttributeDef("cell_size", ("small",)),
                AttributeDef("cell_size", ("large",)),
            )
        )


def test_schema_rejects_empty_and_duplicate_values():
    with pytest.raises(SchemaError, match="no allowed values"):
        AttributeDef("cell_size", ())
    with pytest.raises(SchemaError, match="duplicate allowed values"):
        AttributeDef("cell_size", ("small", "small"))


def test_record_validation_catches_each_constraint(schema):
    valid = {
        "cell_type": "lymphocyte",
        "diagnosis": "CLL",
        "cell_size": "small",
        "nuclear_shape": "round",
        "overall_shape": "round",
        "nuclear_chromatin_texture": "coarse",
        "cytoplasm_amount": "scant",
        "nucleoli_visibility": "inconspicuous",
        "basophilia": "mild",
    }
    record = AttributeRecord("c1", "leukemic", valid)
    assert record_violations(record, schema) == []

    bad_value = dict(valid, nuclear_chromatin_texture="purple")
    problems = record_violations(AttributeRecord("c2", "leukemic", bad_value), schema)
    assert any(p.startswith("invalid value for nuclear_chromatin_texture") for p in problems)

    missing = {k: v for k, v in valid.items() if k != "cell_size"}
    problems = record_violations(AttributeRecord("c3", "leukemic", missing), schema)
    assert "missing value for cell_size" in problems


def test_healthy_cells_cannot_carry_leukemic_values(schema):
    values = {
        "cell_type": "myeloblast",
        "diagnosis": "healthy",
        "cell_size": "large",
        "nuclear_shape": "round",
        "overall_shape": "round",
        "nuclear_chromatin_texture": "open",
        "cytoplasm_amount": "moderate",
        "nucleoli_visibility": "prominent",
        "basophilia": "marked",
    }
    problems = record_violations(AttributeRecord("c4", "healthy", values), schema)
    assert any("myeloblast" in p and "not applicable" in p for p in problems)

    values = dict(values, cell_type="monocyte", diagnosis="AML")
    problems = record_violations(AttributeRecord("c5", "healthy", values), schema)
    assert any("'AML'" in p and "not applicable" in p for p in problems)


def test_record_source_must_be_known():
    with pytest.raises(SchemaError, match="source"):
        AttributeRecord("c1", "synthetic", {})


def test_caption_pair_normalizes_whitespace_and_rejects_empty():
    pair = CaptionPair("c1", "  a   small\tcell ", "fine\n\ncell")
    assert pair.reference == "a small cell"
    assert pair.candidate == "fine cell"
    with pytest.raises(SchemaError, match="empty candidate"):
        CaptionPair("c1", "ok", "   ")


def test_default_lexicon_is_valid(schema, lexicon):
    check_lexicon(lexicon, schema)


def test_lexicon_canonical_is_first_pattern(lexicon):
    assert lexicon.canonical("cell_size", "medium") == lexicon.patterns("cell_size", "medium")[0]


def test_lexicon_canonical_reordering():
    lex = Lexicon.from_dict(
        {
            "cell_size": {
                "small": {"patterns": ["tiny", "small"], "canonical": "small"},
            }
        }
    )
    assert lex.patterns("cell_size", "small") == ("small", "tiny")


def test_lexicon_rejects_cross_value_substring_naming_both_patterns():
    schema = AttributeSchema(
        attributes=(AttributeDef("cell_size", ("small", "medium")),)
    )
    lex = Lexicon.from_dict(
        {
            "cell_size": {
                "small": {"patterns": ["small"]},
                "medium": {"patterns": ["small to medium"]},
            }
        }
    )
    with pytest.raises(LexiconError) as err:
        check_lexicon(lex, schema)
    assert "'small'" in str(err.value)
    assert "'small to medium'" in str(err.value)


def test_lexicon_wildcard_containment_is_flagged():
    schema = AttributeSchema(
        attributes=(AttributeDef("nucleoli_visibility", ("visible", "prominent")),)
    )
    lex = Lexicon.from_dict(
        {
            "nucleoli_visibility": {
                "visible": {"patterns": ["visible nucleoli"]},
                "prominent": {"patterns": ["prominent * nucleoli"]},
            }
        }
    )
    with pytest.raises(LexiconError, match="ambiguous"):
        check_lexicon(lex, schema)


def test_lexicon_requires_full_coverage(schema, lexicon):
    entries = {a: dict(v) for a, v in lexicon.entries.items()}
    del entries["basophilia"]["mild"]
    with pytest.raises(LexiconError, match="no patterns for basophilia=mild"):
        check_lexicon(Lexicon(entries=entries), schema)


def test_lexicon_file_roundtrip(lexicon, tmp_path):
    path = tmp_path / "lexicon.json"
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(lexicon.to_dict(), fh)
    from hemeval.core import load_lexicon

    assert load_lexicon(path) == lexicon


def test_embedding_set_invariants():
    good = EmbeddingSet(
        ids=("a", "b"),
        vectors=np.array([[1.0, 0.0], [0.0, 1.0]]),
        labels={"diagnosis": ("CLL", "AML")},
    )
    assert good.dimension == 2
    with pytest.raises(SchemaError, match="non-finite"):
        EmbeddingSet(ids=("a",), vectors=np.array([[np.nan, 1.0]]), labels={})
    with pytest.raises(SchemaError, match="ids"):
        EmbeddingSet(ids=("a",), vectors=np.array([[1.0], [2.0]]), labels={})
    with pytest.raises(SchemaError, match="label"):
        EmbeddingSet(
            ids=("a", "b"),
            vectors=np.array([[1.0], [2.0]]),
            labels={"diagnosis": ("CLL",)},
        )


def test_embedding_vectors_are_read_only():
    emb = EmbeddingSet(ids=("a",), vectors=np.array([[1.0, 2.0]]), labels={})
    with pytest.raises(ValueError):
        emb.vectors[0, 0] = 5.0
