"""Exception types shared across the package."""


class SynthmiaError(Exception):
    pass


class ParseError(SynthmiaError):
    """Malformed input file (ragged CSV rows, bad JSON, ...)."""


class SchemaViolation(SynthmiaError):
    """A value does not fit the declared domain."""


class ConfigurationError(SynthmiaError):
    """Invalid or unsatisfiable configuration."""


class EstimationError(SynthmiaError):
    """A statistic cannot be estimated (e.g. empty dataset)."""


class ParameterError(SynthmiaError):
    """Invalid mechanism parameter (non-positive scale, ...)."""


class SelectionError(SynthmiaError):
    """A selection mechanism received no valid candidates."""


class UndefinedMetric(SynthmiaError):
    """A metric is undefined for the given inputs (e.g. single-class AUROC)."""


class ResumeMismatch(SynthmiaError):
    """Existing outputs were produced under a different configuration."""
