"""
errors.py

Exception hierarchy shared by every sub-package.

All errors derive from ValueError so callers that only know about
invalid input keep working; orchestration code (GrowthLaboratory, CLI)
catches LabError and turns it into report rows and exit codes.
"""


class LabError(ValueError):
    """Base class for laboratory errors."""


class DomainViolation(LabError):
    """An argument lies outside the domain of a formula."""


class GeometryViolation(LabError):
    """A cylinder or chain leaves the domain it must stay inside."""


class CFLViolation(LabError):
    """Time step too large for the explicit scheme to stay monotone."""


class EllipticityViolation(LabError):
    """Coefficients or ellipticity constants outside the admissible class."""


class CertificationFailure(LabError):
    """A barrier failed its sampled subsolution check."""

    def __init__(self, message: str, point=None, residual: float = float("nan")):
        super().__init__(message)
        self.point = point
        self.residual = residual


class ConfigurationError(LabError):
    """Invalid settings, CLI flags or environment values."""
