"""Linearize question(s), schema, and matched values into one token sequence.

Single turn:   Q | db_id | t1 : c11 [ v ] , c12 , ... | t2 : c21 , ...
Multi turn:    Q_t | db_id | ...schema... || Q_{t-1} | Q_{t-2} | ...

Everything is lowercased.  Delimiters are standalone tokens and standalone
items.  History questions are appended newest-first and dropped whole,
oldest-first, when the token budget is exceeded.
"""

from dataclasses import dataclass, field

from .corpus import QuestionTurn, Schema
from .errors import BudgetTooSmall

DELIMITERS = ("|", ":", ",", "[", "]", "||")

ITEM_KINDS = ("question_token", "db_name", "table_name", "column_name", "value", "delimiter")

DEFAULT_TOKEN_BUDGET = 512


@dataclass(frozen=True)
class Item:
    kind: str
    text: str
    span: tuple[int, int]  # token span in the serialized sequence, end-exclusive
    turn: int | None = None  # question tokens only
    token_index: int | None = None  # index within the turn, question tokens only
    table: int | None = None  # table/column/value items
    column: int | None = None  # column/value items


@dataclass(frozen=True)
class SerializedInput:
    tokens: tuple[str, ...]
    items: tuple[Item, ...]
    token_to_item: tuple[int, ...]
    token_spans: tuple[tuple[int, int], ...] = field(repr=False, default=())

    def to_json_dict(self) -> dict:
        return {
            "tokens": list(self.tokens),
            "items": [
                {
                    "kind": it.kind,
                    "table": it.table,
                    "column": it.column,
                    "turn": it.turn,
                    "span": list(it.span),
                }
                for it in self.items
            ],
            "token_to_item": list(self.token_to_item),
        }


class _Builder:
    def __init__(self):
        self.tokens: list[str] = []
        self.items: list[Item] = []
        self.token_to_item: list[int] = []

    def add(self, kind: str, text: str, **meta) -> None:
        words = text.lower().split()
        start = len(self.tokens)
        item_idx = len(self.items)
        self.tokens.extend(words)
        self.token_to_item.extend([item_idx] * len(words))
        self.items.append(Item(kind, " ".join(words), (start, start + len(words)), **meta))

    def delim(self, d: str) -> None:
        self.add("delimiter", d)

    def finish(self) -> SerializedInput:
        spans = []
        offset = 0
        for tok in self.tokens:
            n = len(tok.encode("utf-8"))
            spans.append((offset, offset + n))
            offset += n + 1  # single joining space
        return SerializedInput(
            tuple(self.tokens), tuple(self.items), tuple(self.token_to_item), tuple(spans)
        )


def _value_map(value_matches) -> dict[tuple[int, int], list[str]]:
    """Group matched values by column, first-match order, deduplicated."""
    grouped: dict[tuple[int, int], list[str]] = {}
    for column_ref, value in value_matches:
        bucket = grouped.setdefault(tuple(column_ref), [])
        if value not in bucket:
            bucket.append(value)
    return grouped


def _emit_core(b: _Builder, question: QuestionTurn, schema: Schema, value_matches) -> None:
    for i, tok in enumerate(question.tokens):
        b.add("question_token", tok.text, turn=question.turn_index, token_index=i)
    b.delim("|")
    b.add("db_name", schema.db_id)
    values = _value_map(value_matches)
    for ti, table in enumerate(schema.tables):
        b.delim("|")
        b.add("table_name", table.name, table=ti)
        b.delim(":")
        for ci, col in enumerate(table.columns):
            if ci > 0:
                b.delim(",")
            b.add("column_name", col.name, table=ti, column=ci)
            matched = values.get((ti, ci))
            if matched:
                b.delim("[")
                for vi, v in enumerate(matched):
                    if vi > 0:
                        b.delim(",")
                    b.add("value", v, table=ti, column=ci)
                b.delim("]")


def serialize_single(question: QuestionTurn, schema: Schema, value_matches=()) -> SerializedInput:
    """Serialize one question with its schema and matched content values."""
    if not question.tokens:
        raise ValueError("question has no tokens")
    b = _Builder()
    _emit_core(b, question, schema, value_matches)
    return b.finish()


def serialize_multi(
    turns: list[QuestionTurn],
    current: int,
    schema: Schema,
    value_matches=(),
    token_budget: int = DEFAULT_TOKEN_BUDGET,
) -> SerializedInput:
    """Serialize turn `current` (1-based) with its history appended at the end.

    History questions are separated by `|` after a leading `||` and kept
    newest-first; whole questions are dropped oldest-first until the total
    token count fits the budget.
    """
    if not 1 <= current <= len(turns):
        raise ValueError(f"current turn {current} out of range 1..{len(turns)}")
    question = turns[current - 1]
    if not question.tokens:
        raise ValueError("question has no tokens")

    b = _Builder()
    _emit_core(b, question, schema, value_matches)
    core_len = len(b.tokens)
    if core_len > token_budget:
        raise BudgetTooSmall(
            f"zero-history sequence needs {core_len} tokens, budget is {token_budget}"
        )

    history = [turns[i] for i in range(current - 2, -1, -1)]  # newest first
    total = core_len
    kept: list[QuestionTurn] = []
    for turn in history:
        cost = 1 + len(turn.tokens)  # separating delimiter plus the words
        if total + cost > token_budget:
            break
        kept.append(turn)
        total += cost

    for k, turn in enumerate(kept):
        b.delim("||" if k == 0 else "|")
        for i, tok in enumerate(turn.tokens):
            b.add("question_token", tok.text, turn=turn.turn_index, token_index=i)
    return b.finish()
