import json

import pytest

from rasat_graph.annotate import (
    CorefLink,
    DependencyEdge,
    chains_to_links,
    edges_from_sentences,
    fallback_coref,
    load_coreference,
    load_coreference_annotations,
    load_dependencies,
    load_dependency_annotations,
    parse_conllu,
)
from rasat_graph.corpus import QuestionTurn, tokenize_text
from rasat_graph.errors import AlignmentError, SpanOutOfRange

from paths import FIXTURES


def _turn(text, index):
    return QuestionTurn(index, text, tokenize_text(text))


def test_parse_groups_by_interaction_id():
    groups = load_dependency_annotations(FIXTURES / "deps.conllu")
    assert sorted(groups) == ["0", "2"]
    assert [len(s) for s in groups["0"]] == [9, 7, 11]
    assert [len(s) for s in groups["2"]] == [7, 5, 5]


def test_head_column_becomes_edge():
    sentences = parse_conllu("1\tshow\t_\t_\t_\t_\t0\troot\t_\t_\n2\tstudents\t_\t_\t_\t_\t1\tobj\t_\t_\n")
    edges = edges_from_sentences(sentences[0][1])
    assert edges == [DependencyEdge(1, 0, 1)]  # head=token1, dependent=token2


def test_single_token_root_only():
    sentences = parse_conllu("1\thello\t_\t_\t_\t_\t0\troot\t_\t_\n")
    assert edges_from_sentences(sentences[0][1]) == []


def test_alignment_error_on_count_mismatch(multis):
    turns = list(multis[0].turns)
    turns[0] = _turn("short question", 1)  # 2 tokens instead of 9
    groups = load_dependency_annotations(FIXTURES / "deps.conllu")
    with pytest.raises(AlignmentError):
        edges_from_sentences(groups["0"], turns)


def test_edges_align_with_fixture_turns(multis):
    groups = load_dependency_annotations(FIXTURES / "deps.conllu")
    edges = edges_from_sentences(groups["0"], list(multis[0].turns))
    assert DependencyEdge(1, 2, 1) in edges  # employees -> all
    assert all(e.head != e.dependent for e in edges)
    # forest: each token has at most one head
    seen = set()
    for e in edges:
        assert (e.turn, e.dependent) not in seen
        seen.add((e.turn, e.dependent))


def test_duplicate_token_id_rejected():
    text = "1\ta\t_\t_\t_\t_\t0\t_\t_\t_\n1\tb\t_\t_\t_\t_\t0\t_\t_\t_\n"
    with pytest.raises(AlignmentError):
        edges_from_sentences(parse_conllu(text)[0][1])


def test_self_heading_token_rejected():
    text = "1\ta\t_\t_\t_\t_\t1\t_\t_\t_\n"
    with pytest.raises(AlignmentError):
        edges_from_sentences(parse_conllu(text)[0][1])


def test_load_dependencies_single_interaction(tmp_path, multis):
    src = (FIXTURES / "deps.conllu").read_text().split("# interaction_id = 2")[1]
    path = tmp_path / "one.conllu"
    path.write_text(src)
    edges = load_dependencies(path, list(multis[2].turns))
    assert DependencyEdge(1, 0, 2) in edges  # show heads students
    assert {e.turn for e in edges} == {1, 2, 3}


def test_chain_expands_to_first_mention(multis):
    chains = load_coreference_annotations(FIXTURES / "coref_chains.json")["2"]
    links = chains_to_links(chains, list(multis[2].turns))
    assert len(links) == 3
    assert all(link.antecedent_turn == 1 and link.antecedent_span == (2, 3) for link in links)
    assert [(l.mention_turn, l.mention_span) for l in links] == [(1, (4, 5)), (2, (3, 4)), (3, (2, 3))]


def test_singleton_chain_yields_no_links():
    assert chains_to_links([[{"turn": 1, "start": 0, "end": 1}]]) == []


def test_links_never_point_forward():
    chains = [[{"turn": 3, "start": 0, "end": 1}, {"turn": 1, "start": 0, "end": 1}]]
    links = chains_to_links(chains)
    assert links == [CorefLink(3, (0, 1), 1, (0, 1))]


def test_span_out_of_range(multis):
    turns = list(multis[2].turns)
    with pytest.raises(SpanOutOfRange):
        chains_to_links([[{"turn": 2, "start": 0, "end": 99}, {"turn": 3, "start": 0, "end": 1}]], turns)
    with pytest.raises(SpanOutOfRange):
        chains_to_links([[{"turn": 1, "start": 2, "end": 2}]], turns)


def test_load_coreference_single_object(tmp_path, multis):
    path = tmp_path / "chains.json"
    chains = json.loads((FIXTURES / "coref_chains.json").read_text())[0]
    path.write_text(json.dumps(chains))
    links = load_coreference(path, list(multis[2].turns))
    assert len(links) == 3


def test_fallback_links_pronoun_to_schema_noun(schemas):
    turns = [
        _turn("show all students .", 1),
        _turn("how old are they ?", 2),
        _turn("where do they live ?", 3),
    ]
    links = fallback_coref(turns, schemas["dorm_1"])
    by_mention = {(l.mention_turn, l.mention_span): (l.antecedent_turn, l.antecedent_span) for l in links}
    assert by_mention[(2, (3, 4))] == (1, (2, 3))  # they -> students
    assert by_mention[(3, (2, 3))] == (1, (2, 3))


def test_fallback_prefers_most_recent_antecedent(schemas):
    turns = [
        _turn("show all students .", 1),
        _turn("list every dorm and their amenities .", 2),
    ]
    links = fallback_coref(turns, schemas["dorm_1"])
    their = next(l for l in links if l.mention_span == (4, 5) and l.mention_turn == 2)
    assert their.antecedent_turn == 2 and their.antecedent_span == (2, 3)  # dorm, not students


def test_fallback_no_pronouns(schemas):
    assert fallback_coref([_turn("show all students .", 1)], schemas["dorm_1"]) == []


def test_fallback_pronoun_without_antecedent(schemas):
    links = fallback_coref([_turn("they arrived early", 1)], schemas["dorm_1"])
    assert links == []
