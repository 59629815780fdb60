"""Exception hierarchy shared by all capecmatch modules.

DataError subclasses map to CLI exit code 2, ProviderError subclasses to 3.
"""


class CapecMatchError(Exception):
    """Base class for all errors raised by this package."""


class DataError(CapecMatchError):
    """A problem with input data (feeds, catalogs, CSVs, corpora)."""


class ParseError(DataError):
    """Malformed input document. Carries the file and position when known."""

    def __init__(self, message: str, *, path=None, line=None):
        self.path = path
        self.line = line
        prefix = ""
        if path is not None:
            prefix = f"{path}: "
        if line is not None:
            prefix += f"line {line}: "
        super().__init__(prefix + message)


class UnsupportedSchemaError(ParseError):
    """The document parsed but its schema version is not supported."""


class FormatError(DataError):
    """A file does not conform to one of the package's own formats."""


class ScoringError(DataError):
    """A (vulnerability, attack pattern) pair cannot be scored."""


class EvaluationError(DataError):
    """Rankings and ground truth cannot be evaluated together."""


class ProviderError(CapecMatchError):
    """An embedding provider failed (worker, cache, or model trouble)."""


class StaleCacheError(ProviderError):
    """The vector cache does not match the requested model or is missing
    texts; re-run `capecmatch embed` to rebuild it."""
