"""Exception taxonomy shared by every module.

Readers and operators raise instead of silently clamping: a malformed file,
an infeasible payload, or a protocol violation should stop the run with a
message naming the violated contract.
"""


class StegError(Exception):
    """Base class for all package errors."""


class FormatError(StegError):
    """A file does not conform to its declared binary layout."""


class DomainError(StegError):
    """An operation received an image from the wrong domain."""


class DimensionError(StegError):
    """Matrix shapes that must agree do not."""


class PayloadError(StegError):
    """Requested payload violates a capacity precondition."""


class ConvergenceError(StegError):
    """Iterative search exhausted its budget without meeting tolerance."""


class ProtocolError(StegError):
    """Remote environment spoke the wire protocol incorrectly."""


class DataError(StegError):
    """Training data is empty or degenerate."""


class ConfigError(StegError):
    """Command-line or config-file values are inconsistent."""
