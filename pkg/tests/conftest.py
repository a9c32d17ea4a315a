import pytest

from rasat_graph.corpus import load_content, load_interactions
from rasat_graph.pipeline import load_schema_map

from paths import FIXTURES


@pytest.fixture(scope="session")
def schemas():
    return load_schema_map(FIXTURES / "tables.json")


@pytest.fixture(scope="session")
def singles():
    return load_interactions(FIXTURES / "dev_single.json", "single_turn")


@pytest.fixture(scope="session")
def multis():
    return load_interactions(FIXTURES / "interactions_multi.json", "multi_turn")


@pytest.fixture(scope="session")
def employee_content(schemas):
    return load_content(schemas["employee_hire_evaluation"], FIXTURES / "content_employee.json")
