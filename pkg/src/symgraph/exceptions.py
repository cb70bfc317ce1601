"""Exception types raised across the package."""


class SymGraphError(Exception):
    """Base class for all package errors."""


class InvalidInputError(SymGraphError, ValueError):
    """An argument violates a documented precondition."""


class InvalidStateError(SymGraphError, RuntimeError):
    """An object is used before it is in a usable state (e.g. an unconverged solve)."""


class CapacityError(SymGraphError):
    """An enumeration or table would exceed a configured cap."""

    def __init__(self, message, cap=None):
        super().__init__(message)
        self.cap = cap


class EmptySetError(SymGraphError):
    """The constrained graph set has no members."""


class InvalidStrategyError(SymGraphError, ValueError):
    """A sampling strategy cannot be applied to the given instance."""
