class TaxedRuinError(Exception):
    pass


class DomainError(TaxedRuinError, ValueError):
    """Argument outside the domain of an operation."""


class UnsupportedSmoothnessError(TaxedRuinError):
    """Derivative order not available for the model (e.g. W'' without a Gaussian part)."""


class AccuracyError(TaxedRuinError):
    """A numerical routine could not reach its tolerance.

    ``achieved`` carries the best error bound that was obtained.
    """

    def __init__(self, message: str, achieved: float = float("nan")):
        super().__init__(f"{message} (achieved error bound {achieved:.3e})")
        self.achieved = achieved


class DivergenceError(TaxedRuinError):
    """The requested quantity is infinite or not provably finite."""


class ConfigError(TaxedRuinError):
    """Invalid run configuration; the message starts with the offending field path."""
