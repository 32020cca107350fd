"""Exception and warning types shared across the package."""


class HamLearnError(Exception):
    """Base class for package errors."""


class InvalidSpecError(HamLearnError, ValueError):
    """Hamiltonian specification violates its invariants."""


class InvalidSelectionError(HamLearnError, ValueError):
    """Subspace selection is malformed (bad count, duplicate bitstrings, mixed drives)."""


class SingularSelectionError(HamLearnError):
    """Selected subspaces give a rank-deficient coefficient matrix."""


class NotBlockDiagonalError(HamLearnError):
    """A transformed operator has entries outside its 2x2 blocks."""

    def __init__(self, message: str, row: int, col: int, magnitude: float):
        super().__init__(message)
        self.row = row
        self.col = col
        self.magnitude = magnitude


class ModeViolationError(HamLearnError, ValueError):
    """Operation is not allowed in the requested experiment mode."""


class OracleSizeError(HamLearnError, ValueError):
    """Dense oracle requested beyond its qubit-count cap."""


class SingularReadoutError(HamLearnError):
    """Readout confusion matrix is not invertible."""


class UndefinedPhaseError(HamLearnError):
    """A Fourier coefficient is exactly zero so its phase is undefined."""


class UnusableFidelityError(HamLearnError):
    """Estimated depolarizing fidelity is not positive."""


class ConvergenceError(HamLearnError):
    """Iterative solver failed to converge."""


class BranchError(HamLearnError, ValueError):
    """Input lies outside the principal branch of the angle mapping."""


class ConfigError(HamLearnError):
    """Run configuration failed to parse or validate."""


class PhaseWrapWarning(UserWarning):
    """Phase differences approach the principal-value wrap at pi."""


class RegimeWarning(UserWarning):
    """Operating point leaves the small-angle regime the estimators assume."""


class MitigationWarning(UserWarning):
    """Readout mitigation produced negative probabilities that were clipped."""
