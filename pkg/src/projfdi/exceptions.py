"""Exception hierarchy shared by all projfdi modules."""


class ProjFdiError(Exception):
    """Base class for all package errors."""


class DimensionError(ProjFdiError, ValueError):
    """Operands have incompatible or inconsistent dimensions."""


class NumericError(ProjFdiError, RuntimeError):
    """A numerical computation failed (singular resolvent, eigen failure, ...)."""


class ConvergenceError(NumericError):
    """An iteration did not converge; carries the last residual seen."""

    def __init__(self, message: str, residual: float | None = None):
        super().__init__(message)
        self.residual = residual


class StructuralError(ProjFdiError, ValueError):
    """Problem data violates a structural assumption (stabilizability, rank, ...)."""


class OverflowGuardError(NumericError):
    """Simulation state exceeded the overflow guard (non-Schur dynamics)."""


class ThresholdDomainError(ProjFdiError, ValueError):
    """A threshold formula was evaluated outside its domain of validity."""


class IllPosedLoopError(ProjFdiError, ValueError):
    """Feedback interconnection has a singular algebraic loop."""


class IdentificationError(ProjFdiError, ValueError):
    """Data-driven model fit failed (rank deficiency, too little data)."""
