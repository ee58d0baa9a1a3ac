"""Exception and warning types shared across the toolkit."""


class CqedError(Exception):
    """Base class for all toolkit errors."""


class ConfigurationError(CqedError):
    """Invalid parameters, Hilbert-space setup, or run configuration."""


class DimensionMismatchError(CqedError):
    """Operator / state shapes do not match."""


class StiffnessError(CqedError):
    """Integrator step size underflowed; carries the failing time."""

    def __init__(self, time_ns: float, message: str = ""):
        self.time_ns = time_ns
        super().__init__(
            f"integration stalled at t = {time_ns:.6g} ns"
            + (f": {message}" if message else "")
        )


class DegenerateSteadyStateError(CqedError):
    """Liouvillian nullspace has dimension > 1 (no unique steady state)."""


class SolverError(CqedError):
    """Linear or ODE solve finished but failed its residual check."""


class UndefinedCorrelationError(CqedError):
    """Steady-state photon number too small to normalize a correlation."""


class NoEnhancementError(CqedError):
    """Lifetime ratio below 1: no Purcell enhancement to quantify."""


class UnsupportedRegimeError(CqedError):
    """Parameter regime outside the validity of the requested formula."""


class DegenerateFitError(CqedError):
    """Normal equations singular with no identifiable parameter direction."""


class ParseError(CqedError):
    """Malformed file content; names file, line and column where known."""

    def __init__(self, message: str, path: str = "<buffer>", line: int | None = None,
                 column: int | None = None):
        self.path = path
        self.line = line
        self.column = column
        loc = path
        if line is not None:
            loc += f":{line}"
        if column is not None:
            loc += f" (column {column})"
        super().__init__(f"{loc}: {message}")


class ValidationError(ParseError):
    """Well-formed but semantically invalid file content (negative counts,
    non-monotone axis, non-finite values)."""


class RegimeWarning(UserWarning):
    """Formula evaluated outside its stated validity regime."""


class NoEnhancementWarning(UserWarning):
    """Computed quantity signals absence of Purcell enhancement."""
