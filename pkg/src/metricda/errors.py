"""Exception types shared across the package."""


class OutOfDomainError(ValueError):
    """Argument lies outside the domain of a potential or its inverse."""


class MembershipError(ValueError):
    """A point does not belong to the action set."""


class UnsupportedDomainError(TypeError):
    """Operation requires a convex domain."""


class NumericError(FloatingPointError):
    """Non-finite values encountered during quadrature."""


class SolverError(RuntimeError):
    """The normalization equation for the dual variable could not be bracketed."""


class StaleStateError(RuntimeError):
    """Density queried after the cumulative reward changed without a re-solve."""


class EnvelopeError(RuntimeError):
    """Rejection sampler acceptance rate fell below the configured floor."""


class StreamContractError(ValueError):
    """An emitted reward violates the bound declared by its stream."""


class ConfigError(ValueError):
    """Invalid experiment configuration; the message carries the field path."""
