"""Exception types shared across the toolkit."""


class MaxwellInvError(Exception):
    """Base class for all toolkit errors."""


class InvalidGeometryError(MaxwellInvError):
    """Mesh or support geometry request is inconsistent."""


class InvalidCoefficientError(MaxwellInvError):
    """Refractive-index field violates admissibility (Re > 0, Im > 0)."""


class FactorizationError(MaxwellInvError):
    """Sparse direct factorization failed (singular or breakdown)."""


class UnknownTagError(MaxwellInvError):
    """Requested curve tag does not exist on the mesh."""


class DegenerateSupportError(MaxwellInvError):
    """Perturbation support covers no triangle of the mesh."""


class NoPeakError(MaxwellInvError):
    """Surface indicator is flat or zero; no peak can be located."""


class ConfigError(MaxwellInvError):
    """Experiment configuration failed validation."""
