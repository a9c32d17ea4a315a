"""End-to-end compilation of one interaction into relation matrices.

Each turn of an interaction becomes one compiled example: the turn is
serialized with its history, linked against the schema, matched against
database content, and turned into an item-level matrix (plus a
subtoken-level one when a tokenizer is available).
"""

from dataclasses import dataclass

import numpy as np

from pathlib import Path

from .annotate import CorefLink, DependencyEdge, fallback_coref
from .corpus import ContentStore, Interaction, Schema, load_content, load_schemas
from .graph import InteractionGraph, build_graph
from .linking import SchemaLinks, ValueMatch, link_schema, match_values
from .serialize import DEFAULT_TOKEN_BUDGET, SerializedInput, serialize_multi, serialize_single
from .subtokens import SubtokenMap, VocabTokenizer, propagate, tokenize


@dataclass
class CompiledTurn:
    turn: int  # 1-based; the turn this example predicts for
    serialized: SerializedInput
    links: dict[int, SchemaLinks]
    value_matches: list[ValueMatch]
    graph: InteractionGraph
    submap: SubtokenMap | None = None
    subtoken_matrix: np.ndarray | None = None


def compile_interaction(
    schema: Schema,
    interaction: Interaction,
    *,
    content: ContentStore | None = None,
    deps: list[DependencyEdge] | None = None,
    corefs: list[CorefLink] | None = None,
    multi_turn: bool = False,
    token_budget: int = DEFAULT_TOKEN_BUDGET,
    tokenizer: VocabTokenizer | None = None,
) -> list[CompiledTurn]:
    """Compile every turn of one interaction.

    Coreference comes from `corefs` when given; in multi-turn mode the
    pronoun fallback covers annotation-free runs.  Single-turn mode never
    adds coreference links.
    """
    turns = list(interaction.turns)
    if corefs is None and multi_turn:
        corefs = fallback_coref(turns, schema)
    corefs = corefs or []
    deps = deps or []

    links_all = {t.turn_index: link_schema(t.token_texts, schema) for t in turns}

    out = []
    for current in range(1, len(turns) + 1):
        question = turns[current - 1]
        vms = match_values(question.token_texts, schema, content) if content else []
        pairs = [((vm.table, vm.column), vm.value) for vm in vms]
        if multi_turn:
            serialized = serialize_multi(turns[:current], current, schema, pairs, token_budget)
        else:
            serialized = serialize_single(question, schema, pairs)
        kept_turns = {it.turn for it in serialized.items if it.kind == "question_token"}
        links = {t: links_all[t] for t in kept_turns}
        visible_corefs = [
            c for c in corefs
            if c.mention_turn in kept_turns and c.antecedent_turn in kept_turns
            and c.mention_turn <= current
        ]
        visible_deps = [d for d in deps if d.turn in kept_turns]
        graph = build_graph(serialized, schema, links, vms, visible_deps, visible_corefs)
        compiled = CompiledTurn(current, serialized, links, vms, graph)
        if tokenizer is not None:
            compiled.submap = tokenize(serialized, tokenizer)
            compiled.subtoken_matrix = propagate(graph, compiled.submap)
        out.append(compiled)
    return out


def load_schema_map(path) -> dict[str, Schema]:
    return {s.db_id: s for s in load_schemas(path)}


class ContentProvider:
    """Resolve database content for a schema from one of several layouts.

    Accepts a JSON value dump (one object or a list of them), a single
    SQLite file, or a directory holding ``{db_id}.sqlite``,
    ``{db_id}/{db_id}.sqlite``, or ``{db_id}.json`` entries.
    """

    def __init__(self, path, max_values_per_column: int = 5000):
        self.path = Path(path) if path is not None else None
        self.cap = max_values_per_column
        self._cache: dict[str, ContentStore | None] = {}
        self._dumps: dict[str, Path] | None = None

    def get(self, schema: Schema) -> ContentStore | None:
        if self.path is None:
            return None
        db_id = schema.db_id
        if db_id not in self._cache:
            self._cache[db_id] = self._load(schema)
        return self._cache[db_id]

    def _load(self, schema: Schema) -> ContentStore | None:
        if self.path.is_dir():
            for candidate in (
                self.path / f"{schema.db_id}.sqlite",
                self.path / schema.db_id / f"{schema.db_id}.sqlite",
                self.path / f"{schema.db_id}.json",
            ):
                if candidate.exists():
                    return load_content(schema, candidate, self.cap)
            return None
        return load_content(schema, self.path, self.cap)
