"""Exception types raised across the package."""


class TrajthermError(Exception):
    """Base class for all package errors."""


class NonHermitianInput(TrajthermError):
    pass


class DimMismatch(TrajthermError):
    pass


class UnknownPreset(TrajthermError):
    pass


class InvalidParam(TrajthermError):
    pass


class OutOfWindow(TrajthermError):
    pass


class ZeroRate(TrajthermError):
    pass


class StepTooLarge(TrajthermError):
    pass


class NormCollapse(TrajthermError):
    pass


class UnsupportedChannelSet(TrajthermError):
    pass


class GridMismatch(TrajthermError):
    pass


class MissingEndpoint(TrajthermError):
    pass


class PositivityLoss(TrajthermError):
    pass


class TooLarge(TrajthermError):
    pass


class EmptyInput(TrajthermError):
    pass


class AbsoluteIrreversibility(TrajthermError):
    """Final outcome has zero probability; entropy production diverges."""


class ConfigError(TrajthermError):
    """Bad run configuration; carries a line/field diagnostic message."""
