"""Exception hierarchy shared by all qcert modules."""


class QcertError(Exception):
    """Base class for all toolkit errors."""


class ValidationError(QcertError):
    """Invalid input: bad dimensions, malformed files, out-of-range parameters."""


class ComputationError(QcertError):
    """A computation produced a result that signals inconsistent inputs."""
