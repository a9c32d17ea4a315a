import numpy as np
import pytest

from rasat_graph.annotate import chains_to_links, edges_from_sentences, fallback_coref, load_coreference_annotations, load_dependency_annotations
from rasat_graph.corpus import Column, Schema, Table
from rasat_graph.errors import InconsistentInputs
from rasat_graph.graph import MATRIX_DTYPE, build_graph, default_matrix, graph_to_json_dict, relation_histogram
from rasat_graph.linking import SchemaLinks, ValueMatch, link_schema, match_values
from rasat_graph.pipeline import compile_interaction
from rasat_graph.relations import RELATION_COUNT, RELATION_LABELS, RelationType as R
from rasat_graph.serialize import Item, SerializedInput, serialize_single

from paths import FIXTURES
from oracles import oracle_graph_matrix
from synth import synth_content, synth_deps, synth_interaction, synth_schema


def _fixture_cases(schemas, singles, multis, employee_content):
    """(serialized, schema, links, vms, deps, corefs) for every named fixture."""
    dep_groups = load_dependency_annotations(FIXTURES / "deps.conllu")
    coref_groups = load_coreference_annotations(FIXTURES / "coref_chains.json")
    cases = []
    for inter in singles:
        schema = schemas[inter.db_id]
        content = employee_content if inter.db_id == "employee_hire_evaluation" else None
        for t in compile_interaction(schema, inter, content=content):
            cases.append((t.serialized, schema, t.links, t.value_matches, [], []))
    for idx, inter in enumerate(multis):
        schema = schemas[inter.db_id]
        content = employee_content if inter.db_id == "employee_hire_evaluation" else None
        turns = list(inter.turns)
        sentences = dep_groups.get(str(idx))
        deps = edges_from_sentences(sentences, turns) if sentences else []
        chains = coref_groups.get(str(idx))
        corefs = chains_to_links(chains, turns) if chains else fallback_coref(turns, schema)
        compiled = compile_interaction(schema, inter, content=content, deps=deps, corefs=corefs, multi_turn=True)
        for t in compiled:
            kept = {it.turn for it in t.serialized.items if it.kind == "question_token"}
            vis_deps = [d for d in deps if d.turn in kept]
            vis_corefs = [c for c in corefs if c.mention_turn in kept and c.antecedent_turn in kept]
            cases.append((t.serialized, schema, t.links, t.value_matches, vis_deps, vis_corefs))
    return cases


def synthetic_cases(n_examples=20, seed=20260808):
    rng = np.random.default_rng(seed)
    cases = []
    for k in range(n_examples):
        schema = synth_schema(rng, k)
        content = synth_content(rng, schema)
        inter = synth_interaction(rng, schema, int(rng.integers(1, 4)), content)
        deps = synth_deps(rng, inter)
        corefs = fallback_coref(list(inter.turns), schema)
        compiled = compile_interaction(
            schema, inter, content=content, deps=deps, corefs=corefs,
            multi_turn=len(inter.turns) > 1,
        )
        for t in compiled:
            kept = {it.turn for it in t.serialized.items if it.kind == "question_token"}
            vis_deps = [d for d in deps if d.turn in kept]
            vis_corefs = [c for c in corefs if c.mention_turn in kept and c.antecedent_turn in kept]
            cases.append((t.serialized, schema, t.links, t.value_matches, vis_deps, vis_corefs))
    return cases


def test_builder_equals_oracle_on_named_fixtures(schemas, singles, multis, employee_content):
    cases = _fixture_cases(schemas, singles, multis, employee_content)
    assert len(cases) >= 12
    for serialized, schema, links, vms, deps, corefs in cases:
        graph = build_graph(serialized, schema, links, vms, deps, corefs)
        oracle = oracle_graph_matrix(serialized, schema, links, vms, deps, corefs)
        assert np.array_equal(graph.matrix.astype(np.int64), oracle)


def test_builder_equals_oracle_on_synthetic_fixtures():
    for serialized, schema, links, vms, deps, corefs in synthetic_cases():
        graph = build_graph(serialized, schema, links, vms, deps, corefs)
        oracle = oracle_graph_matrix(serialized, schema, links, vms, deps, corefs)
        assert np.array_equal(graph.matrix.astype(np.int64), oracle)


def _graph_for(schemas, db_id, question_text, content=None):
    from rasat_graph.corpus import QuestionTurn, tokenize_text

    schema = schemas[db_id]
    turn = QuestionTurn(1, question_text, tokenize_text(question_text))
    vms = match_values(turn.token_texts, schema, content) if content else []
    pairs = [((m.table, m.column), m.value) for m in vms]
    serialized = serialize_single(turn, schema, pairs)
    links = {1: link_schema(turn.token_texts, schema)}
    return build_graph(serialized, schema, links, vms, [], []), serialized


def _item(serialized, kind, **attrs):
    for idx, it in enumerate(serialized.items):
        if it.kind == kind and all(getattr(it, k) == v for k, v in attrs.items()):
            return idx
    raise LookupError((kind, attrs))


def test_schema_encoding_cells(schemas):
    graph, s = _graph_for(schemas, "employee_hire_evaluation", "find all employees")
    employee = _item(s, "table_name", table=0)
    age = _item(s, "column_name", table=0, column=2)
    emp_id = _item(s, "column_name", table=0, column=0)
    assert graph.matrix[employee, age] == R.TABLE_COLUMN_HAS
    assert graph.matrix[age, employee] == R.COLUMN_TABLE_HAS
    assert graph.matrix[employee, emp_id] == R.TABLE_COLUMN_PK
    assert graph.matrix[emp_id, employee] == R.COLUMN_TABLE_PK
    assert graph.matrix[age, emp_id] == R.COLUMN_COLUMN_SAMETABLE
    assert graph.matrix[emp_id, age] == R.COLUMN_COLUMN_SAMETABLE


def test_foreign_key_cells(schemas):
    graph, s = _graph_for(schemas, "dorm_1", "which dorms have a tv")
    fk_col = _item(s, "column_name", table=3, column=1)  # has_amenity.amenid
    pk_col = _item(s, "column_name", table=2, column=0)  # dorm_amenity.amenid
    assert graph.matrix[fk_col, pk_col] == R.COLUMN_COLUMN_FK
    assert graph.matrix[pk_col, fk_col] == R.COLUMN_COLUMN_FKR
    has_amenity = _item(s, "table_name", table=3)
    dorm_amenity = _item(s, "table_name", table=2)
    assert graph.matrix[has_amenity, dorm_amenity] == R.TABLE_TABLE_FK
    assert graph.matrix[dorm_amenity, has_amenity] == R.TABLE_TABLE_FKR


def test_fkb_when_keys_go_both_ways():
    schema = Schema(
        "two_way",
        (
            Table("a", (Column("x", "number"), Column("yref", "number"))),
            Table("b", (Column("y", "number"), Column("xref", "number"))),
        ),
        foreign_keys=(((0, 1), (1, 0)), ((1, 1), (0, 0))),
    )
    from rasat_graph.corpus import QuestionTurn, tokenize_text

    turn = QuestionTurn(1, "show x", tokenize_text("show x"))
    serialized = serialize_single(turn, schema)
    graph = build_graph(serialized, schema, {1: link_schema(turn.token_texts, schema)})
    ta = _item(serialized, "table_name", table=0)
    tb = _item(serialized, "table_name", table=1)
    assert graph.matrix[ta, tb] == R.TABLE_TABLE_FKB
    assert graph.matrix[tb, ta] == R.TABLE_TABLE_FKB


def test_delimiter_cells_are_no_relation(schemas):
    graph, s = _graph_for(schemas, "employee_hire_evaluation", "find all employees")
    delim = _item(s, "delimiter")
    assert (graph.matrix[delim, :] == R.NO_RELATION).all()
    assert (graph.matrix[:, delim] == R.NO_RELATION).all()


def test_question_distance_cells(schemas):
    graph, s = _graph_for(schemas, "employee_hire_evaluation", "find all employees")
    q0 = _item(s, "question_token", token_index=0)
    q1 = _item(s, "question_token", token_index=1)
    q2 = _item(s, "question_token", token_index=2)
    assert graph.matrix[q0, q1] == R.QUESTION_QUESTION_DIST_PLUS_1
    assert graph.matrix[q1, q0] == R.QUESTION_QUESTION_DIST_MINUS_1
    assert graph.matrix[q0, q2] == R.QUESTION_QUESTION_DIST_PLUS_2
    assert graph.matrix[q2, q0] == R.QUESTION_QUESTION_DIST_MINUS_2
    assert graph.matrix[q0, q0] == R.QUESTION_QUESTION_IDENTITY


def test_value_cells(schemas, employee_content):
    graph, s = _graph_for(
        schemas, "employee_hire_evaluation", "Show all employees who come from New York.", employee_content
    )
    city = _item(s, "column_name", table=0, column=3)
    value = _item(s, "value", table=0, column=3)
    new = _item(s, "question_token", token_index=6)
    york = _item(s, "question_token", token_index=7)
    assert graph.matrix[city, value] == R.HAS_DBCONTENT
    assert graph.matrix[value, city] == R.HAS_DBCONTENT_R
    assert graph.matrix[new, city] == R.QUESTION_COLUMN_VALUEMATCH
    assert graph.matrix[city, york] == R.COLUMN_QUESTION_VALUEMATCH
    assert graph.matrix[value, value] == R.NO_RELATION
    q0 = _item(s, "question_token", token_index=0)
    assert graph.matrix[q0, value] == R.NO_RELATION
    assert graph.matrix[value, q0] == R.NO_RELATION


def test_coref_cells(schemas, multis):
    inter = multis[2]
    schema = schemas[inter.db_id]
    turns = list(inter.turns)
    chains = load_coreference_annotations(FIXTURES / "coref_chains.json")["2"]
    corefs = chains_to_links(chains, turns)
    compiled = compile_interaction(schema, inter, corefs=corefs, multi_turn=True)
    t2 = compiled[1]  # current turn 2: "how old are they ?"
    s = t2.serialized
    they = _item(s, "question_token", turn=2, token_index=3)
    students = _item(s, "question_token", turn=1, token_index=2)
    their = _item(s, "question_token", turn=1, token_index=4)
    assert t2.graph.matrix[they, students] == R.COREF_RELATIONS
    assert t2.graph.matrix[their, students] == R.COREF_RELATIONS
    assert t2.graph.matrix[students, they] == R.QUESTION_QUESTION_GENERIC


def test_db_item_cells(schemas):
    graph, s = _graph_for(schemas, "employee_hire_evaluation", "find all employees")
    db = _item(s, "db_name")
    q0 = _item(s, "question_token", token_index=0)
    t0 = _item(s, "table_name", table=0)
    c0 = _item(s, "column_name", table=0, column=0)
    assert graph.matrix[db, db] == R.ANY_ANY_IDENTITY
    assert graph.matrix[q0, db] == R.QUESTION_ANY_GENERIC
    assert graph.matrix[db, q0] == R.ANY_QUESTION_GENERIC
    assert graph.matrix[db, t0] == R.ANY_TABLE_GENERIC
    assert graph.matrix[t0, db] == R.TABLE_ANY_GENERIC
    assert graph.matrix[db, c0] == R.ANY_COLUMN_GENERIC
    assert graph.matrix[c0, db] == R.COLUMN_ANY_GENERIC


def test_matrix_properties(schemas, singles, multis, employee_content):
    for serialized, schema, links, vms, deps, corefs in _fixture_cases(schemas, singles, multis, employee_content):
        graph = build_graph(serialized, schema, links, vms, deps, corefs)
        mat = graph.matrix
        n = graph.n_items
        assert mat.shape == (n, n) and mat.dtype == MATRIX_DTYPE
        assert int(mat.max(initial=0)) < RELATION_COUNT
        # distance antisymmetry, modulo masking by higher-precedence labels
        masking = {R.COREF_RELATIONS, R.CO_RELATIONS, R.FORWARD_SYNTAX, R.BACKWARD_SYNTAX}
        for fwd, rev in (
            (R.QUESTION_QUESTION_DIST_PLUS_1, R.QUESTION_QUESTION_DIST_MINUS_1),
            (R.QUESTION_QUESTION_DIST_PLUS_2, R.QUESTION_QUESTION_DIST_MINUS_2),
        ):
            for i, j in np.argwhere(mat == fwd):
                assert mat[j, i] == rev or R(int(mat[j, i])) in masking
        # fk pairing
        assert np.array_equal(np.argwhere(mat == R.COLUMN_COLUMN_FK), np.argwhere(mat.T == R.COLUMN_COLUMN_FKR))
        assert np.array_equal(np.argwhere(mat == R.TABLE_TABLE_FKB), np.argwhere(mat.T == R.TABLE_TABLE_FKB))
        # match symmetry
        pairs = [
            (R.QUESTION_TABLE_EXACTMATCH, R.TABLE_QUESTION_EXACTMATCH),
            (R.QUESTION_TABLE_PARTIALMATCH, R.TABLE_QUESTION_PARTIALMATCH),
            (R.QUESTION_TABLE_NOMATCH, R.TABLE_QUESTION_NOMATCH),
            (R.QUESTION_COLUMN_EXACTMATCH, R.COLUMN_QUESTION_EXACTMATCH),
            (R.QUESTION_COLUMN_PARTIALMATCH, R.COLUMN_QUESTION_PARTIALMATCH),
            (R.QUESTION_COLUMN_NOMATCH, R.COLUMN_QUESTION_NOMATCH),
            (R.QUESTION_COLUMN_VALUEMATCH, R.COLUMN_QUESTION_VALUEMATCH),
        ]
        for fwd, rev in pairs:
            assert np.array_equal(np.argwhere(mat == fwd), np.argwhere(mat.T == rev))


def test_determinism(schemas, singles, employee_content):
    emp = schemas["employee_hire_evaluation"]
    runs = []
    for _ in range(2):
        t = compile_interaction(emp, singles[1], content=employee_content)[0]
        runs.append(t.graph.matrix.tobytes())
    assert runs[0] == runs[1]


def _single_item_serialized(kind, n, **attrs):
    items = tuple(Item(kind, f"tok{i}", (i, i + 1), **attrs) for i in range(n))
    if kind == "question_token":
        items = tuple(
            Item(kind, f"tok{i}", (i, i + 1), turn=1, token_index=i) for i in range(n)
        )
    tokens = tuple(f"tok{i}" for i in range(n))
    return SerializedInput(tokens, items, tuple(range(n)))


def test_histogram_single_question_token():
    serialized = _single_item_serialized("question_token", 1)
    schema = Schema("db", ())
    graph = build_graph(serialized, schema, {1: SchemaLinks(1)})
    hist = relation_histogram(graph)
    assert hist[R.QUESTION_QUESTION_IDENTITY] == 1
    assert sum(hist.values()) == 1


def test_histogram_delimiters_only():
    items = tuple(Item("delimiter", "|", (i, i + 1)) for i in range(3))
    serialized = SerializedInput(("|",) * 3, items, (0, 1, 2))
    graph = build_graph(serialized, Schema("db", ()))
    hist = relation_histogram(graph)
    assert hist[R.NO_RELATION] == 9
    assert sum(hist.values()) == 9


def test_histogram_sums_to_n_squared(schemas, singles, employee_content):
    emp = schemas["employee_hire_evaluation"]
    t = compile_interaction(emp, singles[1], content=employee_content)[0]
    hist = relation_histogram(t.graph)
    assert sum(hist.values()) == t.graph.n_items ** 2


def test_inconsistent_links_rejected(schemas, singles):
    emp = schemas["employee_hire_evaluation"]
    turn = singles[0].turns[0]
    serialized = serialize_single(turn, emp)
    bad = {1: SchemaLinks(3)}  # wrong token count
    with pytest.raises(InconsistentInputs):
        build_graph(serialized, emp, bad)


def test_inconsistent_value_span_rejected(schemas, singles):
    emp = schemas["employee_hire_evaluation"]
    turn = singles[0].turns[0]
    serialized = serialize_single(turn, emp)
    links = {1: link_schema(turn.token_texts, emp)}
    with pytest.raises(InconsistentInputs):
        build_graph(serialized, emp, links, [ValueMatch((50, 52), 0, 3, "x")])


def test_inconsistent_dep_edge_rejected(schemas, singles):
    from rasat_graph.annotate import DependencyEdge

    emp = schemas["employee_hire_evaluation"]
    turn = singles[0].turns[0]
    serialized = serialize_single(turn, emp)
    links = {1: link_schema(turn.token_texts, emp)}
    with pytest.raises(InconsistentInputs):
        build_graph(serialized, emp, links, [], [DependencyEdge(1, 0, 99)])


def test_links_for_dropped_turns_are_ignored(schemas, multis):
    course = schemas["course_teach"]
    turns = list(multis[1].turns)
    from rasat_graph.serialize import serialize_multi

    serialized = serialize_multi(turns, 3, course, token_budget=50)  # turn 1 dropped
    links = {t.turn_index: link_schema(t.token_texts, course) for t in turns}
    graph = build_graph(serialized, course, links)
    assert graph.n_items == len(serialized.items)


def test_sparse_export_round_trips(schemas, singles, multis, employee_content):
    for serialized, schema, links, vms, deps, corefs in _fixture_cases(schemas, singles, multis, employee_content):
        graph = build_graph(serialized, schema, links, vms, deps, corefs)
        blob = graph_to_json_dict(graph)
        dense = default_matrix(serialized.items)
        for cell in blob["cells"]:
            dense[cell["i"], cell["j"]] = RELATION_LABELS.index(cell["relation"])
        assert np.array_equal(dense, graph.matrix)
        assert sum(blob["histogram"].values()) == graph.n_items ** 2
