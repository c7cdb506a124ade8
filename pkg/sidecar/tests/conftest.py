import os

import pytest
from fastapi.testclient import TestClient

from mpve_sidecar.app import create_app
from mpve_sidecar.config import SidecarConfig

FIXTURE_DIR = os.path.join(os.path.dirname(__file__), "fixtures")


def fixture_path(name: str) -> str:
    return os.path.join(FIXTURE_DIR, name)


@pytest.fixture(scope="session")
def client():
    return TestClient(create_app(SidecarConfig(dim=64)))
