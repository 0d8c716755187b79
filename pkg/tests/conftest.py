from pathlib import Path

import pytest

from topicsessions.syntax import parse_model

FIXTURES = Path(__file__).resolve().parent.parent / "src" / "topicsessions" / "fixtures"


def load(name: str):
    return parse_model((FIXTURES / name).read_text(encoding="utf-8"))


@pytest.fixture
def pc_model():
    return load("pc.ses")


@pytest.fixture
def fixtures_dir():
    return FIXTURES
