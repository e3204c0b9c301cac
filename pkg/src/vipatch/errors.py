"""Exception types shared across the toolkit.

Every error raised by this package derives from VipatchError so callers can
catch toolkit failures with a single except clause. Specific subclasses also
derive from the matching builtin (ValueError, RuntimeError) to stay idiomatic.
"""


class VipatchError(Exception):
    """Base class for all toolkit errors."""


class ConfigError(VipatchError, ValueError):
    """Invalid or inconsistent configuration values."""


class DimensionError(VipatchError, ValueError):
    """Operands disagree on image dimensions or channel counts."""


class FeasibilityError(VipatchError, ValueError):
    """A patch position or radius lies outside the feasible region."""


class ImageFormatError(VipatchError, ValueError):
    """Unsupported image file format, bit depth, or channel layout."""


class OracleError(VipatchError, RuntimeError):
    """A target model failed to produce a usable prediction."""


class ProtocolError(VipatchError, RuntimeError):
    """Malformed traffic on the remote-model wire protocol."""


class RemoteTimeoutError(ProtocolError):
    """The remote model did not answer within the timeout. Retryable."""
