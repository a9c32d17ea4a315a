"""Schema linking: n-gram matches between question tokens and schema items,
plus fuzzy matches between question spans and database cell values.
"""

import re
from dataclasses import dataclass, field

from .corpus import ContentStore, Schema

MAX_NGRAM = 5

# Minimum length for the substring side of a fuzzy comparison.
MIN_SUBSTRING = 4

ItemRef = tuple  # ("table", ti) or ("column", ti, ci)


def name_words(name: str) -> tuple[str, ...]:
    """Split a schema name into lowercase words (underscores, spaces, etc.)."""
    return tuple(w for w in re.split(r"[^0-9a-z]+", name.lower()) if w)


def plural_variants(token: str) -> frozenset[str]:
    variants = {token}
    if token.endswith("s") and len(token) > 1:
        variants.add(token[:-1])
    if token.endswith("es") and len(token) > 2:
        variants.add(token[:-2])
    return frozenset(variants)


def words_plural_equal(a: str, b: str) -> bool:
    """Equality up to a trailing plural suffix on either side."""
    return a == b or not plural_variants(a).isdisjoint(plural_variants(b))


def word_partial_match(question_token: str, name_word: str) -> bool:
    """Loose single-word comparison used for partial matches."""
    if words_plural_equal(question_token, name_word):
        return True
    if len(name_word) >= MIN_SUBSTRING and name_word in question_token:
        return True
    if len(question_token) >= MIN_SUBSTRING and question_token in name_word:
        return True
    return False


@dataclass
class SchemaLinks:
    """Exact/partial labels for (question token, schema item) pairs.

    Pairs not present in `labels` are no-matches; labels are stored from the
    question side, the schema-side direction is the same label flipped.
    """

    n_tokens: int
    labels: dict[tuple[int, ItemRef], str] = field(default_factory=dict)

    def label_for(self, token_idx: int, ref: ItemRef) -> str:
        return self.labels.get((token_idx, ref), "no")


def _schema_item_refs(schema: Schema):
    for ti, table in enumerate(schema.tables):
        yield ("table", ti), name_words(table.name)
        for ci, col in enumerate(table.columns):
            yield ("column", ti, ci), name_words(col.name)


def link_schema(question_tokens, schema: Schema) -> SchemaLinks:
    """Label every (question token, schema item) pair exact/partial/no.

    A contiguous n-gram equal to the item's full name marks all its tokens
    exact; tokens matching single name words (and not covered by an exact
    n-gram for that item) are partial.
    """
    tokens = list(question_tokens)
    links = SchemaLinks(len(tokens))
    for ref, words in _schema_item_refs(schema):
        if not words:
            continue
        k = len(words)
        exact_tokens: set[int] = set()
        if k <= MAX_NGRAM:
            for start in range(len(tokens) - k + 1):
                if all(words_plural_equal(tokens[start + p], words[p]) for p in range(k)):
                    exact_tokens.update(range(start, start + k))
        for idx in exact_tokens:
            links.labels[(idx, ref)] = "exact"
        for idx, tok in enumerate(tokens):
            if idx in exact_tokens:
                continue
            if any(word_partial_match(tok, w) for w in words):
                links.labels[(idx, ref)] = "partial"
    return links


@dataclass(frozen=True)
class ValueMatch:
    span: tuple[int, int]  # token span in the question, end-exclusive
    table: int
    column: int
    value: str  # the matched cell value, verbatim from the content store


def normalize_phrase(s: str) -> str:
    """Lowercase, replace punctuation with spaces, collapse whitespace."""
    s = re.sub(r"[^0-9a-z]+", " ", s.lower())
    return " ".join(s.split())


def fuzzy_value_equal(gram: str, value: str) -> bool:
    """Fuzzy comparison between a question n-gram and one cell value."""
    ng, nv = normalize_phrase(gram), normalize_phrase(value)
    if not ng or not nv:
        return False
    if words_plural_equal(ng, nv):
        return True
    return len(ng) >= MIN_SUBSTRING and ng in nv


def match_values(question_tokens, schema: Schema, content: ContentStore) -> list[ValueMatch]:
    """Report maximal question n-grams that fuzzily match cell values.

    Only text-typed columns participate.  For each (span, column) at most one
    match is reported, carrying the first matching value in store order;
    spans contained in a longer matching span of the same column are dropped.
    """
    tokens = list(question_tokens)
    matches: list[ValueMatch] = []
    for ti, table in enumerate(schema.tables):
        for ci, col in enumerate(table.columns):
            if col.sql_type != "text":
                continue
            values = content.for_column(table.name, col.name)
            if not values:
                continue
            spans: dict[tuple[int, int], str] = {}
            for n in range(min(MAX_NGRAM, len(tokens)), 0, -1):
                for start in range(len(tokens) - n + 1):
                    span = (start, start + n)
                    if any(s <= start and start + n <= e for (s, e) in spans):
                        continue  # contained in a longer match for this column
                    if not normalize_phrase(tokens[start]) or not normalize_phrase(tokens[start + n - 1]):
                        continue  # spans must not start or end on punctuation
                    gram = " ".join(tokens[start : start + n])
                    for v in values:
                        if fuzzy_value_equal(gram, v):
                            spans[span] = v
                            break
            for span in sorted(spans):
                matches.append(ValueMatch(span, ti, ci, spans[span]))
    matches.sort(key=lambda m: (m.span, m.table, m.column))
    return matches


def link_report(links_by_turn: dict[int, SchemaLinks], value_matches, value_turn: int) -> dict:
    """JSON-ready report: exact and partial pairs plus value matches."""
    exact, partial = [], []
    for turn in sorted(links_by_turn):
        links = links_by_turn[turn]
        for (idx, ref), label in sorted(links.labels.items()):
            entry = {"turn": turn, "token": idx, "kind": ref[0], "table": ref[1]}
            entry["column"] = ref[2] if ref[0] == "column" else None
            (exact if label == "exact" else partial).append(entry)
    values = [
        {"turn": value_turn, "span": list(m.span), "table": m.table, "column": m.column, "value": m.value}
        for m in value_matches
    ]
    return {"exact": exact, "partial": partial, "values": values}
