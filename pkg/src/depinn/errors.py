"""Exception hierarchy for the depinning toolkit.

Errors split into two families.  ``ModelError`` covers invalid inputs and
model defects (the CLI maps these to exit status 3).  ``NumericalError``
covers algorithmic failures such as Newton divergence or band escape
(exit status 4); each carries a ``diagnostics`` dictionary that is
serialised verbatim by the CLI.
"""


class DepinnError(Exception):
    """Base class for all toolkit errors."""

    def __init__(self, message, **diagnostics):
        super().__init__(message)
        self.diagnostics = diagnostics


class ModelError(DepinnError, ValueError):
    """Invalid model parameters or a defective generating function."""


class PreconditionError(DepinnError, ValueError):
    """An operation was called with arguments violating its precondition."""


class InconsistentWindow(PreconditionError):
    """Window asymptotes have mismatched types."""


class NumericalError(DepinnError, RuntimeError):
    """An algorithm failed to produce a trustworthy answer."""


class BandEscape(NumericalError):
    """A spacing left the model band during integration."""


class StepUnderflow(NumericalError):
    """The adaptive step size fell below the floor."""


class NewtonDivergence(NumericalError):
    """Newton iteration failed to reach the residual target."""


class BracketError(NumericalError):
    """A scalar root could not be bracketed."""


class NotAnEquilibrium(PreconditionError):
    """A configuration expected to be an equilibrium has a large residual."""


class GluingError(NumericalError):
    """Pieces of a gluing plan disagree too much at a cut."""


class InsufficientTail(NumericalError):
    """A discommensuration window is too short for the requested construction."""


class InternalConsistencyError(NumericalError):
    """Two independent computations of the same quantity disagree."""


class NonexistenceSignal(NumericalError):
    """The solver left the order interval, signalling that no solution exists."""
