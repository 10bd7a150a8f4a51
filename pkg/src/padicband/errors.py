"""Exception types shared across the package."""


class PadicBandError(Exception):
    """Base class for all package-specific errors."""


class NonUnitError(PadicBandError):
    """Inversion was requested for a residue divisible by p."""


class PrimeMismatchError(PadicBandError):
    """Two group or ring values live over different primes."""


class TooLargeError(PadicBandError):
    """An enumeration cap (group order, sequence count, ...) was exceeded."""


class StateSpaceTooLargeError(TooLargeError):
    """The dynamic-programming state space exceeds the configured budget."""


class SetTooLargeError(TooLargeError):
    """A rare-set probe was asked to enumerate too many vectors."""


class NonSquareError(PadicBandError):
    """A square matrix was required."""


class NotRefinableError(PadicBandError):
    """Precision refinement needs a sample key; loaded matrices have none."""


class PrecisionLimitError(PadicBandError):
    """Precision escalation hit K_max without resolving the cokernel."""

    def __init__(self, message: str, k_reached: int):
        super().__init__(message)
        self.k_reached = k_reached


class BlockTooSmallError(PadicBandError):
    """Localization blocks require n > 2L."""


class UnsupportedGroupError(PadicBandError):
    """An analytic bound is only available for the prime cyclic group."""


class ConfigError(PadicBandError):
    """An experiment configuration failed validation."""
