"""
Exception hierarchy for furthlab
"""


class FurthlabError(Exception):
    """Base class for every error raised by the lab."""


class DomainError(FurthlabError, ValueError):
    """An argument is outside the domain of the operation."""


class StabilityError(DomainError):
    """An explicit scheme was asked to take a step it cannot take stably."""


class QuadratureError(FurthlabError):
    """A quadrature cannot converge with the given grid or damping."""


class BracketError(FurthlabError):
    """No eigenvalue bracket was found in the energy window."""


class NormDriftError(FurthlabError):
    """Wavefunction norm drifted past the abort limit."""


class ConfigError(FurthlabError):
    """Bad flag, config-file key or config value."""
