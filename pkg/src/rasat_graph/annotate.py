"""Question dependency edges and cross-turn coreference links.

Both come from external annotation files (a CoNLL-U dump for dependencies,
a JSON chains file for coreference); a deterministic pronoun-resolution
fallback covers annotation-free operation.
"""

import json
from dataclasses import dataclass
from pathlib import Path

from .corpus import QuestionTurn, Schema
from .errors import AlignmentError, SpanOutOfRange
from .linking import link_schema

PRONOUNS = frozenset({"they", "them", "their", "it", "its", "these", "those"})


@dataclass(frozen=True)
class DependencyEdge:
    turn: int  # 1-based turn index
    head: int  # 0-based token indices within the turn
    dependent: int


@dataclass(frozen=True)
class CorefLink:
    mention_turn: int
    mention_span: tuple[int, int]  # end-exclusive token spans
    antecedent_turn: int
    antecedent_span: tuple[int, int]


def parse_conllu(text: str) -> list[tuple[str | None, list[list[tuple[int, str, int]]]]]:
    """Parse CoNLL-U text into interaction groups of sentences.

    Returns [(interaction_id, [sentence, ...]), ...] where each sentence is a
    list of (id, form, head) rows.  Multiword ranges and empty nodes are
    skipped; a `# interaction_id` comment starts a new group.
    """
    groups: list[tuple[str | None, list]] = []
    sentences: list[list[tuple[int, str, int]]] = []
    current: list[tuple[int, str, int]] = []
    group_id: str | None = None
    started = False

    def flush_sentence():
        nonlocal current
        if current:
            sentences.append(current)
            current = []

    def flush_group():
        nonlocal sentences, group_id
        flush_sentence()
        if sentences or started:
            groups.append((group_id, sentences))
        sentences = []

    for line in text.splitlines():
        line = line.strip()
        if not line:
            flush_sentence()
            continue
        if line.startswith("#"):
            comment = line[1:].strip()
            if comment.startswith("interaction_id"):
                if started:
                    flush_group()
                started = True
                rest = comment[len("interaction_id") :].lstrip(" =")
                group_id = rest or None
            continue
        cols = line.split("\t")
        if len(cols) < 7:
            raise AlignmentError(f"CoNLL-U row has {len(cols)} columns: {line!r}")
        if "-" in cols[0] or "." in cols[0]:
            continue
        try:
            tok_id = int(cols[0])
            head = int(cols[6])
        except ValueError as exc:
            raise AlignmentError(f"non-numeric ID/HEAD in row {line!r}") from exc
        started = True
        current.append((tok_id, cols[1], head))
    flush_group()
    return groups


def edges_from_sentences(sentences, turns: list[QuestionTurn] | None = None) -> list[DependencyEdge]:
    """Turn parsed sentences into edges, checking the per-turn forest shape."""
    if turns is not None and len(sentences) != len(turns):
        raise AlignmentError(f"{len(sentences)} sentences for {len(turns)} turns")
    edges: list[DependencyEdge] = []
    for s_idx, rows in enumerate(sentences):
        turn_index = s_idx + 1
        n = len(rows)
        if turns is not None and n != len(turns[s_idx].tokens):
            raise AlignmentError(
                f"turn {turn_index}: {n} CoNLL-U tokens vs {len(turns[s_idx].tokens)} question tokens"
            )
        seen_ids = set()
        for tok_id, _form, head in rows:
            if tok_id in seen_ids:
                raise AlignmentError(f"turn {turn_index}: duplicate token id {tok_id}")
            seen_ids.add(tok_id)
            if not 1 <= tok_id <= n or not 0 <= head <= n:
                raise AlignmentError(f"turn {turn_index}: id/head out of range ({tok_id}, {head})")
            if head == tok_id:
                raise AlignmentError(f"turn {turn_index}: token {tok_id} heads itself")
            if head != 0:
                edges.append(DependencyEdge(turn_index, head - 1, tok_id - 1))
    return edges


def load_dependencies(path: str | Path, turns: list[QuestionTurn] | None = None) -> list[DependencyEdge]:
    """Load dependency edges for a single-interaction CoNLL-U file."""
    groups = parse_conllu(Path(path).read_text(encoding="utf-8"))
    if len(groups) != 1:
        raise AlignmentError(f"expected one interaction in {path}, found {len(groups)}")
    return edges_from_sentences(groups[0][1], turns)


def load_dependency_annotations(path: str | Path) -> dict[str, list]:
    """Load a multi-interaction CoNLL-U file keyed by interaction id.

    Groups without a ``# interaction_id`` comment fall back to their position
    in the file.
    """
    groups = parse_conllu(Path(path).read_text(encoding="utf-8"))
    out = {}
    for k, (gid, sentences) in enumerate(groups):
        out[gid if gid is not None else str(k)] = sentences
    return out


def _check_span(turn: int, span, turns: list[QuestionTurn] | None, what: str) -> tuple[int, int]:
    start, end = int(span[0]), int(span[1])
    if start >= end:
        raise SpanOutOfRange(f"{what}: empty span [{start}, {end})")
    if turns is not None:
        if not 1 <= turn <= len(turns):
            raise SpanOutOfRange(f"{what}: turn {turn} out of range")
        n = len(turns[turn - 1].tokens)
        if not (0 <= start and end <= n):
            raise SpanOutOfRange(f"{what}: span [{start}, {end}) beyond {n} tokens of turn {turn}")
    return start, end


def chains_to_links(chains, turns: list[QuestionTurn] | None = None) -> list[CorefLink]:
    """Expand mention chains: every later mention points at the first one."""
    links: list[CorefLink] = []
    for chain in chains:
        mentions = []
        for m in chain:
            turn = int(m["turn"])
            span = _check_span(turn, (m["start"], m["end"]), turns, "coreference mention")
            mentions.append((turn, span))
        mentions.sort(key=lambda m: (m[0], m[1]))
        if len(mentions) < 2:
            continue
        first_turn, first_span = mentions[0]
        for turn, span in mentions[1:]:
            links.append(CorefLink(turn, span, first_turn, first_span))
    return links


def load_coreference(path: str | Path, turns: list[QuestionTurn] | None = None) -> list[CorefLink]:
    """Load coreference links from a single-interaction chains file."""
    with open(path, encoding="utf-8") as f:
        raw = json.load(f)
    if isinstance(raw, list):
        raise SpanOutOfRange(f"{path} holds multiple interactions; use load_coreference_annotations")
    return chains_to_links(raw.get("chains", []), turns)


def load_coreference_annotations(path: str | Path) -> dict[str, list]:
    """Load a chains file holding one object or a list of objects.

    Entries without an interaction_id fall back to their position in the file.
    """
    with open(path, encoding="utf-8") as f:
        raw = json.load(f)
    entries = raw if isinstance(raw, list) else [raw]
    return {str(e.get("interaction_id", k)): e.get("chains", []) for k, e in enumerate(entries)}


def fallback_coref(turns: list[QuestionTurn], schema: Schema) -> list[CorefLink]:
    """Link pronouns to the nearest earlier token naming a schema item.

    A token counts as a candidate antecedent when it exact- or
    partial-matches any table or column name.
    """
    links: list[CorefLink] = []
    is_candidate: list[list[bool]] = []
    for turn in turns:
        tokens = turn.token_texts
        schema_links = link_schema(tokens, schema)
        flags = [False] * len(tokens)
        for (idx, _ref), label in schema_links.labels.items():
            if label in ("exact", "partial"):
                flags[idx] = True
        is_candidate.append(flags)

    for t_idx, turn in enumerate(turns):
        for i, tok in enumerate(turn.token_texts):
            if tok not in PRONOUNS:
                continue
            antecedent = None
            for j in range(i - 1, -1, -1):
                if is_candidate[t_idx][j]:
                    antecedent = (turn.turn_index, j)
                    break
            if antecedent is None:
                for p_idx in range(t_idx - 1, -1, -1):
                    for j in range(len(turns[p_idx].token_texts) - 1, -1, -1):
                        if is_candidate[p_idx][j]:
                            antecedent = (turns[p_idx].turn_index, j)
                            break
                    if antecedent is not None:
                        break
            if antecedent is not None:
                links.append(
                    CorefLink(turn.turn_index, (i, i + 1), antecedent[0], (antecedent[1], antecedent[1] + 1))
                )
    return links
