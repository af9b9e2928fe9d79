"""Exception hierarchy shared by every module."""


class IsingError(Exception):
    """Base class for all package errors."""


class InvalidArgumentError(IsingError, ValueError):
    """Dimension mismatch, out-of-range index, malformed spins."""


class CapabilityError(IsingError):
    """Problem is larger than an exact (exponential-cost) routine allows."""


class ConfigurationError(IsingError, ValueError):
    """Inconsistent experiment or sampler configuration."""


class ResolutionError(IsingError):
    """A discretisation grid is too coarse to follow the eigenvectors."""


class ConvergenceError(IsingError):
    """Numerical integration drifted outside its tolerance."""
