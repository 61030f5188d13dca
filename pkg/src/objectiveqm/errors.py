"""Exception types shared across the package."""


class InvalidInput(ValueError):
    """Malformed or out-of-range input to a constructor or operation."""


class DomainError(ValueError):
    """Input is well formed but outside the operation's domain."""


class NotFound(KeyError):
    """Unknown class index or observable label."""

    def __str__(self):
        return str(self.args[0]) if self.args else ""


class Infeasible(Exception):
    """No objective model reproduces the requested statistics.

    Raised by the synthesizers. This is a scientific result, not a failure.
    """


class NumericallyAmbiguous(ArithmeticError):
    """Phase-1 objective falls in the gap between the feasible and infeasible tolerances."""


class NoThreshold(Exception):
    """Targets are infeasible even at the smallest probed detection efficiency."""


class TooLarge(ValueError):
    pass


class InfeasibleEvasion(Exception):
    """The minimum-violation family cannot give every context a coincidence."""


class InvariantViolation(AssertionError):
    """An identity that must hold by construction did not. Indicates a bug."""
