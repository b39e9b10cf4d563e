"""Exception types shared across the engine."""


class MMGroundError(Exception):
    """Base class for all engine errors."""


class EmptyPhraseError(MMGroundError):
    """Raised when a phrase normalizes to the empty string."""


class UnknownRelationError(MMGroundError):
    """Raised for a relation name outside the retained taxonomy."""


class DimMismatchError(MMGroundError):
    """Raised when two vectors or stores disagree on dimensionality."""


class ZeroNormError(MMGroundError):
    """Raised when a zero vector reaches a cosine computation."""


class FormatError(MMGroundError):
    """A persisted artifact failed to parse.

    Carries the byte offset (binary formats) or line number (text formats)
    of the failure so corrupted files can be located precisely.
    """

    def __init__(self, message: str, *, offset: int | None = None, line: int | None = None):
        self.offset = offset
        self.line = line
        where = ""
        if offset is not None:
            where = f" at byte offset {offset}"
        elif line is not None:
            where = f" at line {line}"
        super().__init__(f"{message}{where}")


class DuplicateIdError(MMGroundError):
    """Raised when an id appears twice where uniqueness is required."""


class EmptyQueryError(MMGroundError):
    """Raised when a phrase reduces to an empty or stopword-only web query."""


class FetchError(MMGroundError):
    """A web-fetch transport failure; retryable up to the configured budget."""
