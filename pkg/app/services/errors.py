class InvalidGeometryError(ValueError):
    """Raised when a link distance is not strictly positive"""


class DimensionMismatchError(ValueError):
    """Raised when channel and phase vector lengths disagree"""


class DegeneratePhaseError(ValueError):
    """Raised when a phase is requested for a zero-modulus entry"""


class InfeasibleStartError(ValueError):
    """Raised when a convex subproblem is started outside its interior"""


class UnassignedDeviceError(ValueError):
    """Raised when a phase plan leaves a device without an uplink slot"""


class DegenerateLiftError(ValueError):
    """Raised when a lifted DL matrix has zero charging time"""


class UnknownSchemeError(ValueError):
    """Raised for scheme names the experiment harness does not know"""
