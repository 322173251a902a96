from __future__ import annotations

import pytest

from stubserver import StubServer


@pytest.fixture
def stub_server():
    server = StubServer()
    yield server
    server.close()
