import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))  # for `helpers`

from mpve.embedding import MockProvider
from mpve.index import FileParseSource

from helpers import fixture_path


@pytest.fixture
def mock_provider():
    return MockProvider(dim=384)


@pytest.fixture
def small_provider():
    return MockProvider(dim=16)


@pytest.fixture(scope="session")
def fixture_parses():
    return FileParseSource.from_path(fixture_path("parses.conllu"))


@pytest.fixture(scope="session")
def prompt_parses():
    return FileParseSource.from_path(fixture_path("prompt_parses.conllu"))
