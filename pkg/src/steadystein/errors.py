"""Exception hierarchy. CLI exit codes are keyed off these classes."""


class SteadySteinError(Exception):
    """Base class for library errors."""


class StabilityError(SteadySteinError, ValueError):
    """Queue has no stationary distribution (Erlang-C with R >= n)."""


class PreconditionError(SteadySteinError, ValueError):
    """Arguments violate a documented precondition."""


class TruncationError(SteadySteinError):
    """A tail bound could not be certified within the allowed lattice size."""


class NumericError(SteadySteinError, ArithmeticError):
    """Iterative solver or simulation failed to converge or diverged."""


class InvalidPhaseType(SteadySteinError, ValueError):
    """Phase-type tuple is malformed (singular I - P, redundant phase, bad probabilities)."""
