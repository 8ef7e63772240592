"""Error types shared across the package.

Two families matter to callers: configuration problems (bad parameters,
bad config files) and data problems (malformed event files, out-of-bounds
records). The CLI maps ConfigError/DataError to exit code 1 and anything
else to exit code 2.
"""


class ConfigError(ValueError):
    """Invalid configuration value or config file."""


class DataError(ValueError):
    """Invalid input data (event files, streams, tensors).

    Attributes:
        code: short machine-readable error code (stable across releases).
        offset: byte offset in the source file where the problem sits,
            or None when the error is not file-backed.
    """

    def __init__(self, message: str, code: str = "data_error", offset=None):
        super().__init__(message)
        self.code = code
        self.offset = offset
