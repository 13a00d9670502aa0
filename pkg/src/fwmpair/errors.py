"""Exception hierarchy shared by all modules."""


class FwmError(Exception):
    """Base class for toolkit errors."""


class DomainError(FwmError, ValueError):
    """A frequency or wavelength lies outside a dispersion model's validity window."""


class NoZeroDispersionError(FwmError):
    pass


class PhaseMatchError(FwmError):
    """No phase matching in a requested range, or no factorable point."""


class ResolutionError(FwmError, ValueError):
    pass


class SpectrumClippedError(FwmError):
    pass


class CalibrationError(FwmError):
    """Raised when a calibrated fibre misses its targets.

    ``residuals`` maps target name to (achieved, target, tolerance).
    """

    def __init__(self, message, residuals=None):
        super().__init__(message)
        self.residuals = dict(residuals or {})


class NumericError(FwmError):
    pass


class FitError(FwmError):
    def __init__(self, message, residual_rms=float("nan")):
        super().__init__(message)
        self.residual_rms = residual_rms
