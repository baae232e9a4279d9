"""Exception types raised by the package."""


class SchemaError(ValueError):
    """A config or scenario file contains unknown keys or ill-typed values."""


class GeometryError(ValueError):
    """Invalid geometry input (non-convex footprint, wrong winding, ...)."""


class ConfigError(ValueError):
    """A structurally valid config describes an impossible run."""


class TraceFormatError(ValueError):
    """A trace CSV is malformed or violates trace invariants.

    ``line`` is the 1-based line number of the offending row when known.
    """

    def __init__(self, message: str, line: int | None = None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class EpisodeFormatError(ValueError):
    """An episode dataset file cannot be parsed.

    ``byte_offset`` points at the position where parsing failed when known.
    """

    def __init__(self, message: str, byte_offset: int | None = None):
        if byte_offset is not None:
            message = f"{message} (byte offset {byte_offset})"
        super().__init__(message)
        self.byte_offset = byte_offset


class VersionMismatchError(EpisodeFormatError):
    """An episode file was written with an unsupported format version."""

    def __init__(self, found: int, expected: int):
        super().__init__(
            f"episode file format version {found} is not supported "
            f"(this build reads version {expected})"
        )
        self.found = found
        self.expected = expected
