"""Exception hierarchy shared by every module of the package."""


class CascadeError(Exception):
    """Base class for all package errors."""


class ConfigError(CascadeError, ValueError):
    """Invalid configuration, grid or command-line parameters."""


class DomainError(CascadeError, ValueError):
    """An argument lies outside the mathematical domain of the operation."""


class MomentDivergence(DomainError):
    """Requested moment order is at or beyond the finiteness threshold chi(r)."""


class ResourceError(CascadeError):
    """A single request would exceed the configured resource guard."""


class NonConvergence(CascadeError):
    """An iteration hit its cap before stabilising.

    ``unstable`` holds the ``(lo, hi)`` sub-interval that was still moving.
    """

    def __init__(self, message, unstable=None):
        super().__init__(message)
        self.unstable = unstable
