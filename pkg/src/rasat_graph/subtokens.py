"""Subword tokenization of items and propagation of item relations.

An item relation is replicated densely over every (head subtoken, tail
subtoken) pair, so the subtoken matrix consists of constant blocks.
"""

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import AlignmentError, CoverageError
from .graph import InteractionGraph
from .serialize import SerializedInput


@dataclass(frozen=True)
class SubtokenMap:
    pieces: tuple[tuple[str, ...], ...]  # per item, in item order

    @property
    def total(self) -> int:
        return sum(len(p) for p in self.pieces)

    def offsets(self) -> list[int]:
        """Start position of each item's block in the flat subtoken sequence."""
        out, pos = [], 0
        for p in self.pieces:
            out.append(pos)
            pos += len(p)
        return out

    def flat(self) -> list[str]:
        return [piece for item in self.pieces for piece in item]

    def to_json_dict(self) -> dict:
        return {"items": [list(p) for p in self.pieces]}


class VocabTokenizer:
    """Greedy longest-match subword tokenizer over a plain-text vocabulary.

    Input is lowercased; anything not covered by the vocabulary falls back
    to single characters, so no input can be out-of-vocabulary.
    """

    def __init__(self, pieces):
        self.pieces = {p for p in pieces if p}
        self.max_len = max((len(p) for p in self.pieces), default=1)

    @classmethod
    def from_file(cls, path: str | Path) -> "VocabTokenizer":
        text = Path(path).read_text(encoding="utf-8")
        return cls(line.strip() for line in text.splitlines() if line.strip())

    def tokenize(self, text: str) -> list[str]:
        text = text.lower()
        out: list[str] = []
        i = 0
        while i < len(text):
            end = min(len(text), i + self.max_len)
            piece = None
            for j in range(end, i, -1):
                if text[i:j] in self.pieces:
                    piece = text[i:j]
                    break
            if piece is None:
                piece = text[i]
            out.append(piece)
            i += len(piece)
        return out


def tokenize(serialized: SerializedInput, tokenizer: VocabTokenizer) -> SubtokenMap:
    """Tokenize each item independently; delimiters stay single subtokens."""
    pieces = []
    for item in serialized.items:
        if item.kind == "delimiter":
            pieces.append((item.text,))
        else:
            pieces.append(tuple(tokenizer.tokenize(item.text)))
    return SubtokenMap(tuple(pieces))


def load_alignment(path: str | Path, serialized: SerializedInput | None = None) -> SubtokenMap:
    """Load a precomputed per-item subtoken alignment."""
    with open(path, encoding="utf-8") as f:
        raw = json.load(f)
    items = raw.get("items")
    if not isinstance(items, list):
        raise AlignmentError(f"{path}: expected an object with an 'items' array")
    if serialized is not None and len(items) != len(serialized.items):
        raise AlignmentError(
            f"{path}: alignment covers {len(items)} items, input has {len(serialized.items)}"
        )
    pieces = []
    for k, item_pieces in enumerate(items):
        if not isinstance(item_pieces, list) or not item_pieces:
            raise AlignmentError(f"{path}: item {k} has no subtokens")
        pieces.append(tuple(str(p) for p in item_pieces))
    return SubtokenMap(tuple(pieces))


def propagate(graph: InteractionGraph, submap: SubtokenMap) -> np.ndarray:
    """Replicate each item-level relation over its subtoken block."""
    if len(submap.pieces) != graph.n_items:
        raise CoverageError(
            f"subtoken map covers {len(submap.pieces)} items, graph has {graph.n_items}"
        )
    lengths = [len(p) for p in submap.pieces]
    for idx, length in enumerate(lengths):
        if length == 0:
            raise CoverageError(f"item {idx} has no subtokens")
    owners = np.repeat(np.arange(graph.n_items), lengths)
    return graph.matrix[np.ix_(owners, owners)]
