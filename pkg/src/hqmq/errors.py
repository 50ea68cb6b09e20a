"""Exception types shared across the package."""


class InvalidArgument(ValueError):
    """An argument violates a documented precondition."""


class DegenerateChunk(InvalidArgument):
    """A zero-norm chunk was passed where a direction is required."""


class CorruptData(Exception):
    """Serialized data failed validation (checksum, bounds, truncation)."""


class UnsupportedVersion(CorruptData):
    """A serialized file declares a format version this build cannot read."""


class ConfigMismatch(Exception):
    """Two quantized operands disagree on codebook configuration."""
