"""Compile text-to-SQL inputs into complete relation matrices and verify a
relation-aware self-attention reference kernel."""

from .annotate import CorefLink, DependencyEdge, fallback_coref, load_coreference, load_dependencies
from .attention import (
    AttentionParams,
    EncoderConfig,
    EncoderParams,
    RelationEmbeddingTables,
    attend,
    attend_backward,
    encode,
    init_encoder,
    init_tables,
    load_checkpoint,
    save_checkpoint,
    vanilla_attend,
)
from .corpus import (
    Column,
    ContentStore,
    Interaction,
    QuestionTurn,
    Schema,
    Table,
    load_content,
    load_interactions,
    load_schemas,
    schema_to_spider_json,
    tokenize_text,
)
from .estimator import RelationGraphTransformer, check_examples
from .graph import InteractionGraph, build_graph, default_matrix, graph_to_json_dict, relation_histogram
from .linking import SchemaLinks, ValueMatch, link_schema, match_values
from .pipeline import CompiledTurn, ContentProvider, compile_interaction, load_schema_map
from .rasm import read_rasm, write_rasm
from .relations import MOCK_RELATIONS, RELATION_COUNT, RELATION_LABELS, RelationType
from .serialize import DEFAULT_TOKEN_BUDGET, Item, SerializedInput, serialize_multi, serialize_single
from .subtokens import SubtokenMap, VocabTokenizer, load_alignment, propagate, tokenize

__version__ = "0.1.0"
