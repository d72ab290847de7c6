"""Exception types shared across the package."""


class ReljacobiError(Exception):
    pass


class DomainError(ReljacobiError, ValueError):
    """Evaluation point lies outside a field's domain or inside an excluded set."""


class NumericError(ReljacobiError, ArithmeticError):
    """A computation produced non-finite values."""


class CapabilityError(ReljacobiError):
    """An observable was asked for derivatives it cannot provide."""
