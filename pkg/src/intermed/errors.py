"""Exception types shared across the toolkit."""


class ToolkitError(Exception):
    """Base class for all toolkit errors."""


class ValidationError(ToolkitError):
    """Malformed or inconsistent input data; the message names the offending field."""


class GuardError(ToolkitError):
    """A size guard refused an exponential enumeration or an oversized search space."""


class PreconditionError(ToolkitError):
    """An operation was called on inputs that fail its documented precondition."""
