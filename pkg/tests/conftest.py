from __future__ import annotations

import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from hemeval.core import Lexicon
from hemeval.defaults import default_lexicon, default_schema, default_templates_dict
from hemeval.synth import TemplateSet

FIXTURES = Path(__file__).parent / "fixtures"


@pytest.fixture(scope="session")
def schema():
    return default_schema()


@pytest.fixture(scope="session")
def lexicon() -> Lexicon:
    return default_lexicon()


@pytest.fixture(scope="session")
def templates(schema) -> TemplateSet:
    return TemplateSet.from_dict(default_templates_dict(), schema)


@pytest.fixture(scope="session")
def fixtures_dir() -> Path:
    return FIXTURES
