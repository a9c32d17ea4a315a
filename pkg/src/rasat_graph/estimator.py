"""Scikit-learn style facade over the compilation pipeline.

`fit` loads and validates the resources (schemas, content, annotations,
tokenizer vocabulary); `transform` maps raw dataset entries to compiled
relation matrices.  The class follows the estimator conventions, so it
composes with sklearn pipelines and parameter search out of the box.
"""

from pathlib import Path

from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.exceptions import NotFittedError

from .annotate import (
    chains_to_links,
    edges_from_sentences,
    load_coreference_annotations,
    load_dependency_annotations,
)
from .corpus import Schema, parse_example
from .pipeline import ContentProvider, compile_interaction, load_schema_map
from .serialize import DEFAULT_TOKEN_BUDGET
from .subtokens import VocabTokenizer


def check_examples(X, mode: str) -> list[dict]:
    """Validate raw dataset entries before compilation."""
    if isinstance(X, (str, bytes, dict)):
        raise TypeError("X must be a sequence of example objects")
    examples = list(X)
    required = "question" if mode == "single" else "interaction"
    key = "db_id" if mode == "single" else "database_id"
    for i, entry in enumerate(examples):
        if not isinstance(entry, dict):
            raise TypeError(f"example {i}: expected a dict, got {type(entry).__name__}")
        for field in (key, required):
            if field not in entry:
                raise ValueError(f"example {i}: missing field {field!r}")
    return examples


class RelationGraphTransformer(BaseEstimator, TransformerMixin):
    """Compile text-to-SQL examples into complete relation matrices.

    Parameters
    ----------
    schemas : str | Path | list[Schema]
        Path to a Spider-format tables.json, or already-loaded schemas.
    mode : "single" | "multi"
        Dataset flavor: Spider examples or SParC/CoSQL interactions.
    content : str | Path | None
        Database content source (value dump, SQLite file, or directory).
    deps, coref : str | Path | None
        Annotation files; when absent, multi-turn runs use the pronoun
        fallback for coreference and no dependency edges.
    vocab : str | Path | None
        Subword vocabulary; when given, transform also produces
        subtoken-level matrices.
    token_budget : int
        Word-token budget for multi-turn history truncation.
    """

    def __init__(
        self,
        schemas=None,
        mode: str = "single",
        content=None,
        deps=None,
        coref=None,
        vocab=None,
        token_budget: int = DEFAULT_TOKEN_BUDGET,
    ):
        self.schemas = schemas
        self.mode = mode
        self.content = content
        self.deps = deps
        self.coref = coref
        self.vocab = vocab
        self.token_budget = token_budget

    def fit(self, X=None, y=None):
        if self.mode not in ("single", "multi"):
            raise ValueError(f"mode must be 'single' or 'multi', got {self.mode!r}")
        if self.schemas is None:
            raise ValueError("schemas is required")
        if isinstance(self.schemas, (str, Path)):
            self.schema_map_ = load_schema_map(self.schemas)
        else:
            self.schema_map_ = {s.db_id: s for s in self.schemas}
            if not all(isinstance(s, Schema) for s in self.schema_map_.values()):
                raise TypeError("schemas must be a path or a list of Schema objects")
        for path_param in ("content", "deps", "coref", "vocab"):
            value = getattr(self, path_param)
            if value is not None and not Path(value).exists():
                raise ValueError(f"{path_param} path {value} does not exist")
        self.content_ = ContentProvider(self.content)
        self.deps_ = load_dependency_annotations(self.deps) if self.deps else None
        self.coref_ = load_coreference_annotations(self.coref) if self.coref else None
        self.tokenizer_ = VocabTokenizer.from_file(self.vocab) if self.vocab else None
        return self

    def transform(self, X):
        """Compile each entry; single mode yields one CompiledTurn per entry,
        multi mode a list of CompiledTurn (one per turn)."""
        if not hasattr(self, "schema_map_"):
            raise NotFittedError("call fit before transform")
        examples = check_examples(X, self.mode)
        parse_mode = "single_turn" if self.mode == "single" else "multi_turn"
        out = []
        for i, entry in enumerate(examples):
            interaction = parse_example(entry, i, parse_mode)
            schema = self.schema_map_.get(interaction.db_id)
            if schema is None:
                raise ValueError(f"example {i}: unknown db_id {interaction.db_id!r}")
            deps = corefs = None
            if self.deps_ is not None:
                sentences = self.deps_.get(str(i))
                deps = edges_from_sentences(sentences, list(interaction.turns)) if sentences else []
            if self.coref_ is not None:
                chains = self.coref_.get(str(i), [])
                corefs = chains_to_links(chains, list(interaction.turns))
            compiled = compile_interaction(
                schema,
                interaction,
                content=self.content_.get(schema),
                deps=deps,
                corefs=corefs,
                multi_turn=self.mode == "multi",
                token_budget=self.token_budget,
                tokenizer=self.tokenizer_,
            )
            out.append(compiled[0] if self.mode == "single" else compiled)
        return out
