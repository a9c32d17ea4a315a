import json

import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from rasat_graph.estimator import RelationGraphTransformer, check_examples
from rasat_graph.pipeline import CompiledTurn
from rasat_graph.relations import RelationType as R

from paths import FIXTURES


def _examples():
    return json.loads((FIXTURES / "dev_single.json").read_text())


def test_get_set_params_and_clone():
    est = RelationGraphTransformer(schemas=str(FIXTURES / "tables.json"), token_budget=128)
    params = est.get_params()
    assert params["token_budget"] == 128
    assert params["mode"] == "single"
    est.set_params(mode="multi")
    assert est.mode == "multi"
    cloned = clone(est)
    assert cloned.get_params() == est.get_params()


def test_fit_validates_inputs(tmp_path):
    with pytest.raises(ValueError):
        RelationGraphTransformer().fit()
    with pytest.raises(ValueError):
        RelationGraphTransformer(schemas=str(FIXTURES / "tables.json"), mode="dual").fit()
    with pytest.raises(ValueError):
        RelationGraphTransformer(
            schemas=str(FIXTURES / "tables.json"), content=str(tmp_path / "missing.json")
        ).fit()


def test_transform_requires_fit():
    est = RelationGraphTransformer(schemas=str(FIXTURES / "tables.json"))
    with pytest.raises(NotFittedError):
        est.transform(_examples())


def test_check_examples_rejects_bad_inputs():
    with pytest.raises(TypeError):
        check_examples("not a list", "single")
    with pytest.raises(TypeError):
        check_examples([42], "single")
    with pytest.raises(ValueError):
        check_examples([{"db_id": "x"}], "single")
    with pytest.raises(ValueError):
        check_examples([{"database_id": "x"}], "multi")


def test_single_mode_transform(singles):
    est = RelationGraphTransformer(
        schemas=str(FIXTURES / "tables.json"),
        content=str(FIXTURES / "content_employee.json"),
    ).fit()
    out = est.transform(_examples())
    assert len(out) == 3
    assert all(isinstance(c, CompiledTurn) for c in out)
    assert out[1].value_matches and out[1].value_matches[0].value == "New York"
    assert out[0].graph.matrix.shape[0] == out[0].graph.n_items


def test_multi_mode_transform_with_annotations(multis):
    est = RelationGraphTransformer(
        schemas=str(FIXTURES / "tables.json"),
        mode="multi",
        deps=str(FIXTURES / "deps.conllu"),
        coref=str(FIXTURES / "coref_chains.json"),
    ).fit()
    examples = json.loads((FIXTURES / "interactions_multi.json").read_text())
    out = est.transform(examples)
    assert [len(turns) for turns in out] == [3, 3, 3]
    # with a chains file present, the pronoun fallback must not run:
    # the file links they@T2 to students@T1 only, never to advisors
    t2 = out[2][1]
    mat = t2.graph.matrix
    items = t2.serialized.items
    they = next(i for i, it in enumerate(items) if it.kind == "question_token" and it.turn == 2 and it.token_index == 3)
    students = next(i for i, it in enumerate(items) if it.kind == "question_token" and it.turn == 1 and it.token_index == 2)
    advisors = next(i for i, it in enumerate(items) if it.kind == "question_token" and it.turn == 1 and it.token_index == 5)
    assert mat[they, students] == R.COREF_RELATIONS
    assert mat[they, advisors] != R.COREF_RELATIONS


def test_multi_mode_fallback_when_no_annotations():
    est = RelationGraphTransformer(schemas=str(FIXTURES / "tables.json"), mode="multi").fit()
    examples = json.loads((FIXTURES / "interactions_multi.json").read_text())
    out = est.transform(examples)
    t2 = out[2][1]
    mat = t2.graph.matrix
    assert (mat == R.COREF_RELATIONS).sum() > 0


def test_subtoken_output_with_vocab(singles):
    est = RelationGraphTransformer(
        schemas=str(FIXTURES / "tables.json"), vocab=str(FIXTURES / "vocab.txt")
    ).fit()
    out = est.transform([{"db_id": "dorm_min", "question": "List all amenity names."}])
    compiled = out[0]
    assert compiled.subtoken_matrix is not None
    assert compiled.subtoken_matrix.shape[0] == compiled.submap.total
    assert int((compiled.subtoken_matrix == R.COLUMN_COLUMN_FK).sum()) == 4


def test_unknown_db_id_raises():
    est = RelationGraphTransformer(schemas=str(FIXTURES / "tables.json")).fit()
    with pytest.raises(ValueError):
        est.transform([{"db_id": "nope", "question": "hi there"}])


def test_transform_matches_pipeline(schemas, singles, employee_content):
    from rasat_graph.pipeline import compile_interaction

    est = RelationGraphTransformer(
        schemas=str(FIXTURES / "tables.json"),
        content=str(FIXTURES / "content_employee.json"),
    ).fit()
    out = est.transform(_examples())
    direct = compile_interaction(
        schemas["employee_hire_evaluation"], singles[1], content=employee_content
    )[0]
    assert np.array_equal(out[1].graph.matrix, direct.graph.matrix)
    assert out[1].serialized.tokens == direct.serialized.tokens
