import pytest

from cli_driver import FIXTURES


@pytest.fixture(scope="session")
def fixtures():
    assert FIXTURES.is_dir()
    return FIXTURES
