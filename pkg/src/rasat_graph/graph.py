"""Assemble the complete relation matrix over all items of a serialized input.

Every ordered item pair gets exactly one relation id.  Cells are painted in
reverse precedence order, so the most specific applicable rule ends up in
the cell:

  question-question   Identity > Coref > Co > Forward/Backward-Syntax >
                      Dist(+-1, +-2) > None-Syntax (same turn) >
                      Question-Question-Generic (cross turn)
  question-column     Valuematch > Exactmatch > Partialmatch > Nomatch
  question-table      Exactmatch > Partialmatch > Nomatch
  table-table         Identity > Fkb > Fk/Fkr > Generic
  table-column        Pk > Has > Generic
  column-column       Identity > Fk/Fkr > Sametable > Generic
  value cells         Has-Dbcontent / Has-Dbcontent-R, everything else
                      involving a value or delimiter item is No-Relation
"""

from dataclasses import dataclass

import numpy as np

from .corpus import Schema
from .errors import InconsistentInputs
from .relations import RELATION_COUNT, RELATION_LABELS, RelationType as R
from .serialize import SerializedInput

MATRIX_DTYPE = np.uint16


@dataclass(frozen=True)
class InteractionGraph:
    db_id: str
    serialized: SerializedInput
    matrix: np.ndarray  # n_items x n_items relation ids, row = head

    @property
    def n_items(self) -> int:
        return len(self.serialized.items)


class _ItemIndex:
    """Lookup tables from item metadata to item positions."""

    def __init__(self, serialized: SerializedInput):
        self.question: dict[tuple[int, int], int] = {}
        self.turn_counts: dict[int, int] = {}
        self.tables: dict[int, int] = {}
        self.columns: dict[tuple[int, int], int] = {}
        self.values: list[tuple[int, int, int]] = []  # (item_idx, table, column)
        self.db: int | None = None
        for idx, item in enumerate(serialized.items):
            if item.kind == "question_token":
                self.question[(item.turn, item.token_index)] = idx
                self.turn_counts[item.turn] = self.turn_counts.get(item.turn, 0) + 1
            elif item.kind == "table_name":
                self.tables[item.table] = idx
            elif item.kind == "column_name":
                self.columns[(item.table, item.column)] = idx
            elif item.kind == "value":
                self.values.append((idx, item.table, item.column))
            elif item.kind == "db_name":
                self.db = idx

    def question_items(self):
        return sorted(self.question.items(), key=lambda kv: kv[1])


def _validate(index: _ItemIndex, schema: Schema, links, value_matches, deps, corefs, current_turn):
    for ti in index.tables:
        if not 0 <= ti < len(schema.tables):
            raise InconsistentInputs(f"serialized table index {ti} absent from schema")
    for turn, schema_links in (links or {}).items():
        if turn not in index.turn_counts:
            continue  # turn dropped by history truncation
        if schema_links.n_tokens != index.turn_counts[turn]:
            raise InconsistentInputs(
                f"links for turn {turn} cover {schema_links.n_tokens} tokens, "
                f"serialized has {index.turn_counts[turn]}"
            )
        for (_idx, ref) in schema_links.labels:
            if ref[0] == "table" and ref[1] not in index.tables:
                raise InconsistentInputs(f"link references missing table {ref[1]}")
            if ref[0] == "column" and (ref[1], ref[2]) not in index.columns:
                raise InconsistentInputs(f"link references missing column {ref[1:]}")
    n_current = index.turn_counts.get(current_turn, 0)
    for vm in value_matches or ():
        if not (0 <= vm.span[0] < vm.span[1] <= n_current):
            raise InconsistentInputs(f"value-match span {vm.span} outside current turn")
        if (vm.table, vm.column) not in index.columns:
            raise InconsistentInputs(f"value match references missing column {(vm.table, vm.column)}")
    for edge in deps or ():
        if edge.turn not in index.turn_counts:
            continue
        n = index.turn_counts[edge.turn]
        if not (0 <= edge.head < n and 0 <= edge.dependent < n):
            raise InconsistentInputs(f"dependency edge {edge} outside turn {edge.turn}")
    for link in corefs or ():
        for turn, span in ((link.mention_turn, link.mention_span), (link.antecedent_turn, link.antecedent_span)):
            if turn not in index.turn_counts:
                continue
            if not (0 <= span[0] < span[1] <= index.turn_counts[turn]):
                raise InconsistentInputs(f"coreference span {span} outside turn {turn}")


def build_graph(
    serialized: SerializedInput,
    schema: Schema,
    links=None,
    value_matches=(),
    deps=(),
    corefs=(),
) -> InteractionGraph:
    """Assign exactly one relation id to every ordered item pair."""
    index = _ItemIndex(serialized)
    q_items = index.question_items()
    current_turn = serialized.items[0].turn if q_items else None
    _validate(index, schema, links, value_matches, deps, corefs, current_turn)

    n = len(serialized.items)
    mat = np.full((n, n), int(R.NO_RELATION), dtype=MATRIX_DTYPE)

    _paint_question_question(mat, index, deps, corefs)
    _paint_question_schema(mat, index, links, value_matches, current_turn)
    _paint_schema_schema(mat, index, schema)
    _paint_values(mat, index)

    return InteractionGraph(schema.db_id, serialized, mat)


def _paint_question_question(mat, index: _ItemIndex, deps, corefs):
    q_items = index.question_items()
    # base layer: same turn defaults to None-Syntax, cross turn to Generic
    for (turn_a, pos_a), ia in q_items:
        for (turn_b, pos_b), ib in q_items:
            if turn_a != turn_b:
                mat[ia, ib] = R.QUESTION_QUESTION_GENERIC
                continue
            d = pos_b - pos_a
            if d == 0:
                continue  # diagonal painted last
            elif d == -2:
                mat[ia, ib] = R.QUESTION_QUESTION_DIST_MINUS_2
            elif d == -1:
                mat[ia, ib] = R.QUESTION_QUESTION_DIST_MINUS_1
            elif d == 1:
                mat[ia, ib] = R.QUESTION_QUESTION_DIST_PLUS_1
            elif d == 2:
                mat[ia, ib] = R.QUESTION_QUESTION_DIST_PLUS_2
            else:
                mat[ia, ib] = R.NONE_SYNTAX

    # backward pass first so a (degenerate) two-cycle resolves to Forward
    for edge in deps or ():
        head = index.question.get((edge.turn, edge.head))
        dep = index.question.get((edge.turn, edge.dependent))
        if head is not None and dep is not None:
            mat[dep, head] = R.BACKWARD_SYNTAX
    for edge in deps or ():
        head = index.question.get((edge.turn, edge.head))
        dep = index.question.get((edge.turn, edge.dependent))
        if head is not None and dep is not None:
            mat[head, dep] = R.FORWARD_SYNTAX

    # Co-Relations: tokens of one mention span considered as a whole
    spans = []
    for link in corefs or ():
        spans.append((link.mention_turn, link.mention_span))
        spans.append((link.antecedent_turn, link.antecedent_span))
    for turn, (s, e) in spans:
        positions = [index.question.get((turn, p)) for p in range(s, e)]
        positions = [p for p in positions if p is not None]
        for a in positions:
            for b in positions:
                if a != b:
                    mat[a, b] = R.CO_RELATIONS

    # Coref-Relations: each mention token points at each antecedent token
    for link in corefs or ():
        mention = [
            index.question.get((link.mention_turn, p))
            for p in range(link.mention_span[0], link.mention_span[1])
        ]
        antecedent = [
            index.question.get((link.antecedent_turn, p))
            for p in range(link.antecedent_span[0], link.antecedent_span[1])
        ]
        for a in mention:
            for b in antecedent:
                if a is not None and b is not None and a != b:
                    mat[a, b] = R.COREF_RELATIONS

    for (_turn, _pos), idx in q_items:
        mat[idx, idx] = R.QUESTION_QUESTION_IDENTITY


_MATCH_IDS = {
    "table": {
        "no": (R.QUESTION_TABLE_NOMATCH, R.TABLE_QUESTION_NOMATCH),
        "partial": (R.QUESTION_TABLE_PARTIALMATCH, R.TABLE_QUESTION_PARTIALMATCH),
        "exact": (R.QUESTION_TABLE_EXACTMATCH, R.TABLE_QUESTION_EXACTMATCH),
    },
    "column": {
        "no": (R.QUESTION_COLUMN_NOMATCH, R.COLUMN_QUESTION_NOMATCH),
        "partial": (R.QUESTION_COLUMN_PARTIALMATCH, R.COLUMN_QUESTION_PARTIALMATCH),
        "exact": (R.QUESTION_COLUMN_EXACTMATCH, R.COLUMN_QUESTION_EXACTMATCH),
    },
}


def _paint_question_schema(mat, index: _ItemIndex, links, value_matches, current_turn):
    q_items = index.question_items()
    links = links or {}

    for (turn, pos), qi in q_items:
        if index.db is not None:
            mat[qi, index.db] = R.QUESTION_ANY_GENERIC
            mat[index.db, qi] = R.ANY_QUESTION_GENERIC
        turn_links = links.get(turn)
        for ti, item_idx in index.tables.items():
            label = turn_links.label_for(pos, ("table", ti)) if turn_links else "no"
            fwd, rev = _MATCH_IDS["table"][label]
            mat[qi, item_idx] = fwd
            mat[item_idx, qi] = rev
        for (ti, ci), item_idx in index.columns.items():
            label = turn_links.label_for(pos, ("column", ti, ci)) if turn_links else "no"
            fwd, rev = _MATCH_IDS["column"][label]
            mat[qi, item_idx] = fwd
            mat[item_idx, qi] = rev

    # value matches beat exact/partial on question-column cells
    for vm in value_matches or ():
        col_item = index.columns[(vm.table, vm.column)]
        for pos in range(vm.span[0], vm.span[1]):
            qi = index.question.get((current_turn, pos))
            if qi is None:
                continue
            mat[qi, col_item] = R.QUESTION_COLUMN_VALUEMATCH
            mat[col_item, qi] = R.COLUMN_QUESTION_VALUEMATCH


def _paint_schema_schema(mat, index: _ItemIndex, schema: Schema):
    db = index.db
    tables = index.tables
    columns = index.columns

    if db is not None:
        mat[db, db] = R.ANY_ANY_IDENTITY
        for item_idx in tables.values():
            mat[db, item_idx] = R.ANY_TABLE_GENERIC
            mat[item_idx, db] = R.TABLE_ANY_GENERIC
        for item_idx in columns.values():
            mat[db, item_idx] = R.ANY_COLUMN_GENERIC
            mat[item_idx, db] = R.COLUMN_ANY_GENERIC

    # table-table
    fk_tables = {(a[0], b[0]) for a, b in schema.foreign_keys}
    for ta, ia in tables.items():
        for tb, ib in tables.items():
            if ta == tb:
                mat[ia, ib] = R.TABLE_TABLE_IDENTITY
            elif (ta, tb) in fk_tables and (tb, ta) in fk_tables:
                mat[ia, ib] = R.TABLE_TABLE_FKB
            elif (ta, tb) in fk_tables:
                mat[ia, ib] = R.TABLE_TABLE_FK
            elif (tb, ta) in fk_tables:
                mat[ia, ib] = R.TABLE_TABLE_FKR
            else:
                mat[ia, ib] = R.TABLE_TABLE_GENERIC

    # table-column and column-table
    for ta, ia in tables.items():
        pk = set(schema.tables[ta].primary_key_indices)
        for (tc, ci), ic in columns.items():
            if tc != ta:
                mat[ia, ic] = R.TABLE_COLUMN_GENERIC
                mat[ic, ia] = R.COLUMN_TABLE_GENERIC
            elif ci in pk:
                mat[ia, ic] = R.TABLE_COLUMN_PK
                mat[ic, ia] = R.COLUMN_TABLE_PK
            else:
                mat[ia, ic] = R.TABLE_COLUMN_HAS
                mat[ic, ia] = R.COLUMN_TABLE_HAS

    # column-column: generic, then same-table, then foreign keys, then identity
    for ka, ia in columns.items():
        for kb, ib in columns.items():
            if ia == ib:
                continue
            if ka[0] == kb[0]:
                mat[ia, ib] = R.COLUMN_COLUMN_SAMETABLE
            else:
                mat[ia, ib] = R.COLUMN_COLUMN_GENERIC
    for a, b in schema.foreign_keys:  # reverse direction first: forward wins
        if a in columns and b in columns:
            mat[columns[b], columns[a]] = R.COLUMN_COLUMN_FKR
    for a, b in schema.foreign_keys:
        if a in columns and b in columns:
            mat[columns[a], columns[b]] = R.COLUMN_COLUMN_FK
    for _k, idx in columns.items():
        mat[idx, idx] = R.COLUMN_COLUMN_IDENTITY


def _paint_values(mat, index: _ItemIndex):
    for vi, ti, ci in index.values:
        col_item = index.columns.get((ti, ci))
        if col_item is None:
            continue
        mat[col_item, vi] = R.HAS_DBCONTENT
        mat[vi, col_item] = R.HAS_DBCONTENT_R


def relation_histogram(graph: InteractionGraph) -> dict[R, int]:
    counts = np.bincount(graph.matrix.ravel(), minlength=RELATION_COUNT)
    return {R(i): int(c) for i, c in enumerate(counts)}


def default_matrix(items) -> np.ndarray:
    """Mock-relation baseline implied by item kinds alone.

    The sparse JSON export omits exactly the cells equal to this baseline;
    a reader reconstructs the full matrix as baseline + exported cells.
    """
    n = len(items)
    mat = np.full((n, n), int(R.NO_RELATION), dtype=MATRIX_DTYPE)
    kind_of = [getattr(it, "kind", None) or it["kind"] for it in items]
    turn_of = [getattr(it, "turn", None) if not isinstance(it, dict) else it.get("turn") for it in items]
    defaults = {
        ("question_token", "db_name"): R.QUESTION_ANY_GENERIC,
        ("db_name", "question_token"): R.ANY_QUESTION_GENERIC,
        ("question_token", "table_name"): R.QUESTION_TABLE_NOMATCH,
        ("table_name", "question_token"): R.TABLE_QUESTION_NOMATCH,
        ("question_token", "column_name"): R.QUESTION_COLUMN_NOMATCH,
        ("column_name", "question_token"): R.COLUMN_QUESTION_NOMATCH,
        ("db_name", "db_name"): R.ANY_ANY_IDENTITY,
        ("db_name", "table_name"): R.ANY_TABLE_GENERIC,
        ("table_name", "db_name"): R.TABLE_ANY_GENERIC,
        ("db_name", "column_name"): R.ANY_COLUMN_GENERIC,
        ("column_name", "db_name"): R.COLUMN_ANY_GENERIC,
        ("table_name", "table_name"): R.TABLE_TABLE_GENERIC,
        ("table_name", "column_name"): R.TABLE_COLUMN_GENERIC,
        ("column_name", "table_name"): R.COLUMN_TABLE_GENERIC,
        ("column_name", "column_name"): R.COLUMN_COLUMN_GENERIC,
    }
    for i in range(n):
        for j in range(n):
            ki, kj = kind_of[i], kind_of[j]
            if ki == "question_token" and kj == "question_token":
                mat[i, j] = R.NONE_SYNTAX if turn_of[i] == turn_of[j] else R.QUESTION_QUESTION_GENERIC
            else:
                mat[i, j] = defaults.get((ki, kj), R.NO_RELATION)
    return mat


def graph_to_json_dict(graph: InteractionGraph) -> dict:
    """Sparse JSON export: items, non-mock cells, and the label histogram."""
    base = default_matrix(graph.serialized.items)
    diff = np.argwhere(graph.matrix != base)
    cells = [
        {"i": int(i), "j": int(j), "relation": RELATION_LABELS[graph.matrix[i, j]]}
        for i, j in diff
    ]
    hist = {
        RELATION_LABELS[rel]: count
        for rel, count in sorted((int(r), c) for r, c in relation_histogram(graph).items() if c)
    }
    out = graph.serialized.to_json_dict()
    return {
        "db_id": graph.db_id,
        "relation_count": RELATION_COUNT,
        "n_items": graph.n_items,
        "tokens": out["tokens"],
        "items": out["items"],
        "token_to_item": out["token_to_item"],
        "cells": cells,
        "histogram": hist,
    }
