"""Exception hierarchy.

Errors fall in three families that the command-line runner maps onto exit
codes: configuration problems, numerical-regime problems (a computation was
asked outside the range where it is valid), and everything else.
"""


class GhostImagingError(Exception):
    """Base class for all package errors."""


class ConfigError(GhostImagingError):
    """Invalid scenario configuration; ``path`` names the offending field."""

    def __init__(self, path, message):
        self.path = path
        super().__init__(f"{path}: {message}" if path else message)


class InvalidParams(GhostImagingError, ValueError):
    pass


class GridMismatch(GhostImagingError, ValueError):
    pass


class RegimeError(GhostImagingError):
    """A computation was requested outside its regime of validity."""


class SamplingTooCoarse(RegimeError):
    pass


class GridTooSmall(RegimeError):
    pass


class IntermediateRegime(RegimeError):
    pass


class BrightnessRegimeAmbiguous(RegimeError):
    pass


class NotLowBrightness(RegimeError):
    pass


class NonPositiveSpectrum(RegimeError):
    pass


class RegionTooLarge(RegimeError):
    pass


class ToleranceUnreachable(RegimeError):
    pass


class RateOverflow(RegimeError):
    pass


class NoPeak(GhostImagingError):
    pass


class NonclassicalState(GhostImagingError):
    """The state has no proper P-representation, so it cannot be sampled as classical fields."""


class InsufficientSamples(GhostImagingError):
    pass
