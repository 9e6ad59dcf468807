"""Exception types shared across the package."""


class FormatError(ValueError):
    """A file exists but its content is not in a supported format."""


class TruncatedFileError(OSError):
    """A file ended before all expected content was read."""


class UndefinedScoreError(ValueError):
    """A comparison had no jointly valid template cells."""
