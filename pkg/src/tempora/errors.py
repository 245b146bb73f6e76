"""Exception hierarchy shared across the package."""


class TemporaError(Exception):
    """Base class for all package errors."""


class ConfigError(TemporaError, ValueError):
    """Invalid configuration or parameter combination."""


class SchemaError(TemporaError, ValueError):
    """Input values outside the allowed panel encodings."""


class ParseError(SchemaError):
    """Malformed panel or prediction file."""

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class DataError(TemporaError, ValueError):
    """Data unusable for the requested operation (empty, missing target...)."""


class MissingTargetError(DataError, KeyError):
    """A target vector required by the operation is absent for an era."""

    def __str__(self):
        return str(self.args[0]) if self.args else "missing target"


class NotReadyError(DataError):
    """Not enough lagged history to compute a rolling statistic."""


class SplitSpecError(ConfigError):
    """Overlapping, reversed or otherwise invalid train/validation/test ranges."""


class UndefinedMetricError(TemporaError, ArithmeticError):
    """A correlation or ratio is mathematically undefined for the input."""


class AlignmentError(DataError):
    """Series or prediction sets do not share the same era index."""


class PruneCapError(ConfigError):
    """Requested pruning of more than half of the trees."""
