"""Exception types shared across the package.

Everything raised on purpose derives from CloudSigError so callers (and the
CLI) can separate domain problems from genuine bugs.
"""


class CloudSigError(Exception):
    """Base class for all deliberate failures."""


class ValidationError(CloudSigError):
    """Bad argument, bad configuration, or broken precondition."""


class ParseError(ValidationError):
    """Malformed text input. Carries the 1-based line number when known."""

    def __init__(self, message, line=None, path=None):
        self.line = line
        self.path = path
        where = ""
        if path is not None:
            where += f"{path}"
        if line is not None:
            where += f":{line}"
        if where:
            message = f"{where}: {message}"
        super().__init__(message)


class VocabularyError(ValidationError):
    """Class vocabularies disagree between two inputs."""


class BinningError(ValidationError):
    """Histogram bin layouts disagree or are invalid."""


class ShapeError(ValidationError):
    """Array shapes or image resolutions disagree."""


class NotSupportedError(CloudSigError):
    """Declared but intentionally unimplemented variant."""
