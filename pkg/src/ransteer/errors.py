"""Shared exception types. The CLI maps these onto exit codes."""


class RansteerError(Exception):
    """Base class for all package errors."""


class ConfigError(RansteerError):
    """Invalid or missing configuration (exit code 2 at the CLI)."""


class DatasetFormatError(ConfigError):
    """A dataset file violates the transition record schema.

    Carries the 1-based line number and the offending field when known.
    """

    def __init__(self, message: str, line: int | None = None, field: str | None = None):
        self.line = line
        self.field = field
        prefix = ""
        if line is not None:
            prefix += f"line {line}: "
        if field is not None:
            prefix += f"field '{field}': "
        super().__init__(prefix + message)


class TrainingError(RansteerError):
    """Training diverged or produced non-finite values."""


class UnsupportedError(RansteerError):
    """Operation not supported for the given model structure."""
