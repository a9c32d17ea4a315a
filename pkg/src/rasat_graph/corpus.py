"""Loaders for database schemas, question files, and database content.

All loaders are pure: they read a file, validate it, and return immutable
structures that are safe to share between workers.
"""

import decimal
import json
import re
import sqlite3
import string
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ContentMismatch, MalformedExample, MalformedSchema, UnreadableSource

COLUMN_TYPES = ("text", "number", "time", "boolean", "others")

_PUNCT = frozenset(string.punctuation)


@dataclass(frozen=True)
class Column:
    name: str
    sql_type: str  # one of COLUMN_TYPES


@dataclass(frozen=True)
class Table:
    name: str
    columns: tuple[Column, ...]
    primary_key_indices: tuple[int, ...] = ()


@dataclass(frozen=True)
class Schema:
    db_id: str
    tables: tuple[Table, ...]
    # ((table_idx, col_idx) -> (table_idx, col_idx)): the first column is the
    # foreign key, the second the column it references.
    foreign_keys: tuple[tuple[tuple[int, int], tuple[int, int]], ...] = ()

    def column(self, table_idx: int, col_idx: int) -> Column:
        return self.tables[table_idx].columns[col_idx]

    def iter_columns(self):
        for ti, table in enumerate(self.tables):
            for ci, col in enumerate(table.columns):
                yield ti, ci, col


@dataclass(frozen=True)
class Token:
    text: str  # lowercased
    start: int  # character offsets into the original turn text
    end: int


@dataclass(frozen=True)
class QuestionTurn:
    turn_index: int  # 1-based
    text: str
    tokens: tuple[Token, ...]
    gold_sql: str | None = None  # carried through opaquely, never parsed

    @property
    def token_texts(self) -> tuple[str, ...]:
        return tuple(t.text for t in self.tokens)


@dataclass(frozen=True)
class Interaction:
    db_id: str
    turns: tuple[QuestionTurn, ...]


@dataclass
class ContentStore:
    """Distinct cell values per (table name, column name), lowercase keys."""

    values: dict[tuple[str, str], tuple[str, ...]] = field(default_factory=dict)

    def for_column(self, table_name: str, column_name: str) -> tuple[str, ...]:
        return self.values.get((table_name.lower(), column_name.lower()), ())

    def __len__(self) -> int:
        return len(self.values)


def tokenize_text(text: str) -> tuple[Token, ...]:
    """Lowercase, split on whitespace, split off leading/trailing punctuation."""
    tokens: list[Token] = []
    for m in re.finditer(r"\S+", text):
        chunk, start = m.group(), m.start()
        # peel leading punctuation
        while chunk and chunk[0] in _PUNCT:
            tokens.append(Token(chunk[0].lower(), start, start + 1))
            chunk = chunk[1:]
            start += 1
        # peel trailing punctuation, kept in original order after the core
        trailing: list[Token] = []
        while chunk and chunk[-1] in _PUNCT:
            trailing.append(Token(chunk[-1].lower(), start + len(chunk) - 1, start + len(chunk)))
            chunk = chunk[:-1]
        if chunk:
            tokens.append(Token(chunk.lower(), start, start + len(chunk)))
        tokens.extend(reversed(trailing))
    return tuple(tokens)


def _require(obj: dict, key: str, db_id: str):
    if key not in obj:
        raise MalformedSchema(db_id, key, "missing field")
    return obj[key]


def load_schemas(path: str | Path) -> list[Schema]:
    """Read a Spider-format tables.json into Schema objects.

    Global column indices are remapped to (table, local) pairs and the
    implicit ``*`` pseudo-column is dropped.
    """
    with open(path, encoding="utf-8") as f:
        raw = json.load(f)
    if not isinstance(raw, list):
        raise MalformedSchema("<file>", "<root>", "expected a JSON array")
    return [_schema_from_spider(entry) for entry in raw]


def _schema_from_spider(entry: dict) -> Schema:
    db_id = entry.get("db_id")
    if not isinstance(db_id, str) or not db_id:
        raise MalformedSchema(str(db_id), "db_id", "missing or empty")
    table_names = _require(entry, "table_names_original", db_id)
    column_names = _require(entry, "column_names_original", db_id)
    column_types = _require(entry, "column_types", db_id)
    primary_keys = _require(entry, "primary_keys", db_id)
    foreign_keys = _require(entry, "foreign_keys", db_id)
    if len(column_types) != len(column_names):
        raise MalformedSchema(db_id, "column_types", "length differs from column_names_original")

    # global index -> (table_idx, local_idx); the `*` entry maps to None
    global_map: list[tuple[int, int] | None] = []
    columns_per_table: list[list[Column]] = [[] for _ in table_names]
    for gi, pair in enumerate(column_names):
        ti, name = pair
        if ti == -1:
            global_map.append(None)
            continue
        if not 0 <= ti < len(table_names):
            raise MalformedSchema(db_id, "column_names_original", f"dangling table index {ti}")
        if not isinstance(name, str) or not name:
            raise MalformedSchema(db_id, "column_names_original", f"empty column name at index {gi}")
        sql_type = column_types[gi]
        if sql_type not in COLUMN_TYPES:
            sql_type = "others"
        global_map.append((ti, len(columns_per_table[ti])))
        columns_per_table[ti].append(Column(name, sql_type))

    pk_per_table: list[list[int]] = [[] for _ in table_names]
    for gi in primary_keys:
        if not isinstance(gi, int) or not 0 <= gi < len(global_map) or global_map[gi] is None:
            raise MalformedSchema(db_id, "primary_keys", f"dangling column index {gi}")
        ti, ci = global_map[gi]
        pk_per_table[ti].append(ci)

    fk_pairs = []
    for pair in foreign_keys:
        if len(pair) != 2:
            raise MalformedSchema(db_id, "foreign_keys", f"expected a pair, got {pair!r}")
        resolved = []
        for gi in pair:
            if not isinstance(gi, int) or not 0 <= gi < len(global_map) or global_map[gi] is None:
                raise MalformedSchema(db_id, "foreign_keys", f"dangling column index {gi}")
            resolved.append(global_map[gi])
        if resolved[0][0] == resolved[1][0]:
            raise MalformedSchema(db_id, "foreign_keys", f"pair {pair!r} stays within one table")
        fk_pairs.append((resolved[0], resolved[1]))

    tables = []
    seen_tables = set()
    for ti, name in enumerate(table_names):
        if not isinstance(name, str) or not name:
            raise MalformedSchema(db_id, "table_names_original", f"empty table name at index {ti}")
        lowered = name.lower()
        if lowered in seen_tables:
            raise MalformedSchema(db_id, "table_names_original", f"duplicate table name {name!r}")
        seen_tables.add(lowered)
        cols = columns_per_table[ti]
        seen_cols = set()
        for col in cols:
            cl = col.name.lower()
            if cl in seen_cols:
                raise MalformedSchema(db_id, "column_names_original", f"duplicate column {col.name!r} in table {name!r}")
            seen_cols.add(cl)
        tables.append(Table(name, tuple(cols), tuple(pk_per_table[ti])))

    return Schema(db_id, tuple(tables), tuple(fk_pairs))


def schema_to_spider_json(schema: Schema) -> dict:
    """Export a Schema back to the Spider tables.json entry layout."""
    table_names = [t.name for t in schema.tables]
    column_names: list[list] = [[-1, "*"]]
    column_types: list[str] = ["text"]
    global_index: dict[tuple[int, int], int] = {}
    for ti, ci, col in schema.iter_columns():
        global_index[(ti, ci)] = len(column_names)
        column_names.append([ti, col.name])
        column_types.append(col.sql_type)
    primary_keys = [
        global_index[(ti, ci)]
        for ti, table in enumerate(schema.tables)
        for ci in table.primary_key_indices
    ]
    foreign_keys = [[global_index[a], global_index[b]] for a, b in schema.foreign_keys]
    return {
        "db_id": schema.db_id,
        "table_names_original": table_names,
        "column_names_original": column_names,
        "column_types": column_types,
        "primary_keys": primary_keys,
        "foreign_keys": foreign_keys,
    }


def load_interactions(path: str | Path, mode: str) -> list[Interaction]:
    """Read question files.

    mode="single_turn" expects Spider example objects (db_id, question);
    mode="multi_turn" expects SParC/CoSQL interaction objects (database_id,
    interaction: [{utterance, query}]).
    """
    if mode not in ("single_turn", "multi_turn"):
        raise ValueError(f"unknown mode {mode!r}")
    with open(path, encoding="utf-8") as f:
        raw = json.load(f)
    if not isinstance(raw, list):
        raise MalformedExample(0, "expected a JSON array of examples")
    out = []
    for idx, entry in enumerate(raw):
        if mode == "single_turn":
            out.append(_single_turn(entry, idx))
        else:
            out.append(_multi_turn(entry, idx))
    return out


def parse_example(entry: dict, idx: int, mode: str) -> Interaction:
    """Parse one dataset entry (Spider object or SParC/CoSQL interaction)."""
    if mode == "single_turn":
        return _single_turn(entry, idx)
    if mode == "multi_turn":
        return _multi_turn(entry, idx)
    raise ValueError(f"unknown mode {mode!r}")


def _make_turn(text, turn_index, idx, gold_sql=None) -> QuestionTurn:
    if not isinstance(text, str) or not text.strip():
        raise MalformedExample(idx, f"empty utterance in turn {turn_index}")
    tokens = tokenize_text(text)
    if not tokens:
        raise MalformedExample(idx, f"turn {turn_index} has no tokens")
    return QuestionTurn(turn_index, text, tokens, gold_sql)


def _single_turn(entry: dict, idx: int) -> Interaction:
    try:
        db_id = entry["db_id"]
        question = entry["question"]
    except (KeyError, TypeError):
        raise MalformedExample(idx, "expected object with db_id and question") from None
    gold = entry.get("query")
    return Interaction(db_id, (_make_turn(question, 1, idx, gold),))


def _multi_turn(entry: dict, idx: int) -> Interaction:
    try:
        db_id = entry["database_id"]
        interaction = entry["interaction"]
    except (KeyError, TypeError):
        raise MalformedExample(idx, "expected object with database_id and interaction") from None
    if not isinstance(interaction, list) or not interaction:
        raise MalformedExample(idx, "interaction must be a non-empty array")
    turns = []
    for t, turn in enumerate(interaction, start=1):
        if not isinstance(turn, dict) or "utterance" not in turn:
            raise MalformedExample(idx, f"turn {t} lacks an utterance")
        turns.append(_make_turn(turn["utterance"], t, idx, turn.get("query")))
    return Interaction(db_id, tuple(turns))


def canonical_number(value) -> str:
    """Render a numeric cell value without trailing zeros or a leading +."""
    if isinstance(value, bool):
        return "1" if value else "0"
    if isinstance(value, int):
        return str(value)
    d = decimal.Decimal(repr(value))
    return format(d.normalize(), "f")


def load_content(schema: Schema, source: str | Path, max_values_per_column: int = 5000) -> ContentStore:
    """Load distinct cell values from an SQLite file or a JSON value dump."""
    source = Path(source)
    if not source.exists():
        raise UnreadableSource(f"content source {source} does not exist")
    with open(source, "rb") as f:
        head = f.read(16)
    if head.startswith(b"SQLite format 3\x00"):
        return _content_from_sqlite(schema, source, max_values_per_column)
    return _content_from_dump(schema, source, max_values_per_column)


def _dedup_cap(values, cap: int) -> tuple[str, ...]:
    seen = set()
    out = []
    for v in values:
        if v in seen:
            continue
        seen.add(v)
        out.append(v)
        if len(out) >= cap:
            break
    return tuple(out)


def _content_from_dump(schema: Schema, source: Path, cap: int) -> ContentStore:
    try:
        with open(source, encoding="utf-8") as f:
            raw = json.load(f)
    except (OSError, json.JSONDecodeError) as exc:
        raise UnreadableSource(f"cannot parse {source}: {exc}") from exc
    if isinstance(raw, list):  # dump file covering several databases
        raw = next((e for e in raw if e.get("db_id") == schema.db_id), {})
    elif raw.get("db_id") not in (None, schema.db_id):
        raw = {}
    return content_from_dump_dict(schema, raw, cap)


def content_from_dump_dict(schema: Schema, data: dict, cap: int = 5000) -> ContentStore:
    known = {(t.name.lower(), c.name.lower()) for t in schema.tables for c in t.columns}
    store = ContentStore()
    for col in data.get("columns", []):
        key = (str(col["table"]).lower(), str(col["column"]).lower())
        if key not in known:
            raise ContentMismatch(f"dumped column {key[0]}.{key[1]} is absent from schema {schema.db_id}")
        store.values[key] = _dedup_cap((str(v) for v in col.get("values", [])), cap)
    return store


def _content_from_sqlite(schema: Schema, source: Path, cap: int) -> ContentStore:
    store = ContentStore()
    try:
        conn = sqlite3.connect(f"file:{source}?mode=ro", uri=True)
    except sqlite3.Error as exc:
        raise UnreadableSource(f"cannot open {source}: {exc}") from exc
    try:
        cur = conn.cursor()
        existing = {
            str(r[0]).lower()
            for r in cur.execute("SELECT name FROM sqlite_master WHERE type='table'")
        }
        for table in schema.tables:
            if table.name.lower() not in existing:
                continue  # content simply absent for tables missing from the file
            cols = {
                str(r[1]).lower()
                for r in cur.execute(f'PRAGMA table_info("{_q(table.name)}")')
            }
            for col in table.columns:
                if col.name.lower() not in cols:
                    continue
                rows = cur.execute(
                    f'SELECT DISTINCT "{_q(col.name)}" FROM "{_q(table.name)}" LIMIT {int(cap)}'
                )
                rendered = []
                for (cell,) in rows:
                    if cell is None or isinstance(cell, bytes):
                        continue
                    if isinstance(cell, (int, float)):
                        rendered.append(canonical_number(cell))
                    else:
                        rendered.append(str(cell))
                store.values[(table.name.lower(), col.name.lower())] = _dedup_cap(rendered, cap)
    except sqlite3.Error as exc:
        raise UnreadableSource(f"cannot read {source}: {exc}") from exc
    finally:
        conn.close()
    return store


def _q(identifier: str) -> str:
    return identifier.replace('"', '""')
