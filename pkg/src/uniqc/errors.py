"""Exception types shared across the package."""


class UniqcError(Exception):
    """Base class for all errors raised by uniqc."""


class NotHermitian(UniqcError, ValueError):
    pass


class NotUnitary(UniqcError, ValueError):
    pass


class NoConvergence(UniqcError, RuntimeError):
    pass


class DimensionMismatch(UniqcError, ValueError):
    pass


class EmptyInput(UniqcError, ValueError):
    pass


class EnumerationTooLarge(UniqcError, ValueError):
    """Raised when explicit enumeration would exceed the configured cap.

    Callers should fall back to a predicate / Monte Carlo mode.
    """


class SymbolOutOfRange(UniqcError, ValueError):
    pass


class LengthMismatch(UniqcError, ValueError):
    pass


class CodewordOutOfRange(UniqcError, ValueError):
    pass


class LabelOutOfRange(UniqcError, ValueError):
    pass


class InvalidState(UniqcError, ValueError):
    """A matrix or vector fails the density-matrix / normalization invariants."""


class MixedSignalsNeedDensityForm(UniqcError, ValueError):
    pass


class Infeasible(UniqcError, ValueError):
    pass


class InconsistentTrial(UniqcError, ValueError):
    pass


class EntropyBudgetExceeded(UserWarning):
    """Issued when a source's entropy exceeds the budget a subspace was built for."""


class ConfigError(UniqcError, ValueError):
    """Aggregated configuration validation failure."""

    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))
