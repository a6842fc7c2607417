"""Exception types shared across the package."""


class EmbedriftError(Exception):
    """Base class for all errors raised by this package."""


class FormatError(EmbedriftError):
    """A vector file violates its declared format."""


class TruncationError(FormatError):
    """A vector file ended before the declared record count was read."""

    def __init__(self, message: str, record_index: int):
        super().__init__(message)
        self.record_index = record_index


class ParseError(EmbedriftError):
    """A text input line could not be parsed."""

    def __init__(self, message: str, line_number: int):
        super().__init__(message)
        self.line_number = line_number


class DimensionError(EmbedriftError):
    """Vectors or tables of incompatible dimensionality were combined."""


class ConfigError(EmbedriftError):
    """A configuration value is outside its permitted range."""


class UnknownTokenError(EmbedriftError):
    """A queried token is not present in the relevant table or log."""

    def __init__(self, message: str, tokens: tuple[str, ...] = ()):
        super().__init__(message)
        self.tokens = tokens


class VersionError(EmbedriftError):
    """A serialized artifact declares an unsupported schema version."""
