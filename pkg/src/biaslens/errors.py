"""Exception hierarchy for biaslens.

Every error raised by the library derives from BiasLensError so callers can
catch one type at pipeline boundaries. Input-format errors carry the file
name and line number of the offending record.
"""

from __future__ import annotations


class BiasLensError(Exception):
    """Base class for all biaslens errors."""


class SchemeViolationError(BiasLensError):
    """A feature value or feature name does not belong to the declared scheme."""


class EmptyRunError(BiasLensError):
    """A ranked run has no entries."""


class EmptyPopulationError(BiasLensError):
    """A target population has no labeled members."""


class UnlabeledEntityError(BiasLensError):
    """Strict mode: an entity inside the evaluation window has no label."""


class TopicMismatchError(BiasLensError):
    """Run and target distribution refer to different topics."""


class EmptyAggregateError(BiasLensError):
    """Aggregation was requested over zero bias records."""


class InfeasibleSimulationError(BiasLensError):
    """Requested (target ratio, bias, length) combination cannot be realized."""


class ParseError(BiasLensError):
    """Malformed input file. Carries file name, line number and field."""

    def __init__(self, message: str, *, path: str = "<input>",
                 line: int | None = None, field: str | None = None):
        self.path = path
        self.line = line
        self.field = field
        where = path if line is None else f"{path}:{line}"
        suffix = f" (field: {field})" if field else ""
        super().__init__(f"{where}: {message}{suffix}")


class SchemaVersionError(BiasLensError):
    """A report document carries an unsupported schema version."""
