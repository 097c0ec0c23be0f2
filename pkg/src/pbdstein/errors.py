"""Exception hierarchy shared by all modules.

The CLI maps these onto exit codes: domain/validation problems exit 2,
mathematical inapplicability exits 3, numerical-consistency failures exit 4.
"""


class PBDError(Exception):
    """Base class for every error raised by this package."""


class ParameterDomainError(PBDError, ValueError):
    """A parameter lies outside the domain where the computation is defined."""


class DivergenceError(ParameterDomainError):
    """The equilibrium series of a birth-death chain is not summable."""


class InapplicableError(PBDError, ValueError):
    """A formula's precondition fails (e.g. the PBD fit condition)."""

    def __init__(self, condition: str, message: str | None = None):
        self.condition = condition
        super().__init__(message or f"inapplicable: {condition}")


class NumericalConsistencyError(PBDError, RuntimeError):
    """An internal cross-check or residual contract was violated."""


class TruncationError(NumericalConsistencyError):
    """The retained support is too short for the requested computation."""


class SimulationCapError(NumericalConsistencyError):
    """A simulation exceeded its hard event-count cap."""
