"""Exception types shared across the package."""


class TlspectroError(Exception):
    """Base class for package errors."""


class ConfigurationError(TlspectroError):
    """Invalid parameters, configs, or scenario scripts (CLI exit code 1)."""


class BiasInsensitiveTlsError(TlspectroError):
    """Raised when a bias solution is requested for a defect with p_z = 0."""


class UnfittableRoiError(TlspectroError):
    """ROI cannot support a hyperbola fit; carries a human-readable reason."""

    def __init__(self, reason: str):
        super().__init__(reason)
        self.reason = reason


class GridFormatError(TlspectroError):
    """Malformed grid file (CLI exit code 2); names the byte offset."""

    def __init__(self, message: str, offset: int | None = None):
        if offset is not None:
            message = f"{message} (at byte offset {offset})"
        super().__init__(message)
        self.offset = offset


class UntrainedClassifierError(TlspectroError):
    """Pixel classifier used before fit()."""


class NoEligibleTlsError(TlspectroError):
    """A statistics operation was given no fits inside the counting band."""
