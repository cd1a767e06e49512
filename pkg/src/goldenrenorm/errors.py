"""Exception types shared across the package."""


class RenormError(Exception):
    """Base class for all package errors."""


class NonFiniteInput(RenormError, ValueError):
    """A series or parameter contains NaN or infinite values."""


class DomainEscape(RenormError):
    """An inner map leaves the validity disk of the outer map."""


class CriticalCenter(RenormError):
    """An inverse branch was requested at (or too near) a critical point."""


class NonPositiveLength(RenormError, ValueError):
    """A rotation pre-renormalization step produced a non-positive length."""


class NotAlmostCommuting(RenormError):
    """A pair fails the almost-commuting or normalization conditions."""


class NonRenormalizable(RenormError):
    """A pair cannot be renormalized (domains escape or the combinatorics fail)."""


class NewtonDivergence(RenormError):
    """Newton's method failed to reduce the residual."""


class DegenerateTilt(RenormError):
    """A tilt decomposition found a vanishing diagonal entry."""


class ConfigError(RenormError):
    """Invalid configuration."""


class MissingArtifact(RenormError):
    """A command needs an artifact file that does not exist."""
