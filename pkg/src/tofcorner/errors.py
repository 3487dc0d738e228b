"""Exception types shared across the package."""


class TofCornerError(Exception):
    """Base class for all package errors."""


class DegenerateScene(TofCornerError):
    """Corner angle outside (0, pi) or otherwise unrenderable geometry."""


class BelowHorizon(TofCornerError):
    """A reflectance direction lies at or below the surface tangent plane."""


class ZeroSignal(TofCornerError):
    """Phasor combination received no energy."""


class BadKernelSize(TofCornerError):
    """Filter aperture is not one of the supported odd sizes."""


class DimensionMismatch(TofCornerError):
    """Arrays that must be co-registered disagree in shape."""


class EmptyInput(TofCornerError):
    pass


class NonFiniteData(TofCornerError):
    pass


class BadMagic(TofCornerError):
    """File does not start with the expected magic bytes."""


class VersionMismatch(TofCornerError):
    pass


class TruncatedFile(TofCornerError):
    pass


class DivisionByZeroGroundTruth(TofCornerError):
    """A zero ground-truth depth reached the relative-error computation."""


class LayoutMismatch(TofCornerError):
    """Model feature layout disagrees with the extractor layout."""


class InsufficientData(TofCornerError):
    pass


class InvalidCount(TofCornerError):
    pass
