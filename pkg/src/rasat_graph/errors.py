"""Exception types raised across the pipeline."""


class PipelineError(Exception):
    """Base class for all errors raised by this package."""


class MalformedSchema(PipelineError):
    """Schema file violates the documented layout or an invariant."""

    def __init__(self, db_id: str, field: str, message: str):
        self.db_id = db_id
        self.field = field
        super().__init__(f"schema {db_id!r}, field {field!r}: {message}")


class MalformedExample(PipelineError):
    """Question/interaction file entry is unusable."""

    def __init__(self, index: int, message: str):
        self.index = index
        super().__init__(f"example {index}: {message}")


class ContentMismatch(PipelineError):
    """Database content references a column the schema does not have."""


class UnreadableSource(PipelineError):
    """Content source is neither a readable SQLite file nor a value dump."""


class BudgetTooSmall(PipelineError):
    """Token budget cannot hold even the history-free sequence."""


class AlignmentError(PipelineError):
    """External annotation does not line up with the question tokens."""


class SpanOutOfRange(PipelineError):
    """Coreference span lies outside its turn."""


class InconsistentInputs(PipelineError):
    """Graph inputs reference items absent from the serialized sequence."""


class ShapeError(PipelineError):
    """Array arguments have inconsistent shapes."""


class IdOutOfRange(PipelineError):
    """Relation id exceeds the embedding table size."""


class StaleCache(PipelineError):
    """Backward pass received a cache that no longer matches its inputs."""


class CoverageError(PipelineError):
    """Subtoken map does not cover every item of the graph."""
