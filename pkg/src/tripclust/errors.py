"""Exception types shared across the package."""


class TripclustError(Exception):
    """Base class for all package errors."""


class ValidationError(TripclustError):
    """Bad input data, configuration, or arguments."""


class SchemaError(ValidationError):
    """A required column is missing from a delimited input file."""


class RowError(ValidationError):
    """A data row failed to parse; carries the 1-based line number."""

    def __init__(self, line_no: int, message: str):
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no


class EmptyCorpusError(ValidationError):
    """The input yielded no documents."""


class MappingError(ValidationError):
    """A station has no community label during vocabulary remapping."""


class NoTargetError(TripclustError):
    """A relocation draw found no existing cluster to move into."""


class ConsistencyError(TripclustError):
    """The sampler's sufficient statistics disagree with the assignments.

    Indicates an implementation bug, never bad user input.
    """
